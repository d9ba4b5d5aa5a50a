#include "fewshot/predictor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>

namespace fewshot {

namespace {

std::atomic<std::uint64_t> g_forward_calls{0};

void check_dim(const PhiModel& phi, std::span<const double> v, const char* what) {
  if (v.size() != phi.dim()) {
    throw ValidationError(std::string(what) + " has length " + std::to_string(v.size()) +
                          ", predictor dim is " + std::to_string(phi.dim()));
  }
}

// y = M x
void matvec(SquareView<const double> m, std::span<const double> x, std::span<double> y) {
  for (std::size_t r = 0; r < m.dim; ++r) y[r] = dot(m.row(r), x);
}

// Intermediates of one forward pass, kept for backprop.
struct ForwardTrace {
  std::vector<double> pre;     // W1 s + b1       (TwoLayer)
  std::vector<double> hidden;  // relu(pre)       (TwoLayer)
  double norm = 0.0;           // ||W2 h + b2||   (TwoLayer)
  std::vector<double> out;
};

ForwardTrace forward_traced(const PhiModel& phi, std::span<const double> s) {
  check_dim(phi, s, "statistic");
  g_forward_calls.fetch_add(1, std::memory_order_relaxed);
  const std::size_t d = phi.dim();
  const PhiParams& p = phi.params();
  ForwardTrace t;
  t.out.resize(d);
  if (phi.variant() == PhiVariant::Linear) {
    matvec(p.w(), s, t.out);
    return t;
  }
  t.pre.resize(d);
  t.hidden.resize(d);
  matvec(p.w1(), s, t.pre);
  for (std::size_t i = 0; i < d; ++i) {
    t.pre[i] += p.b1()[i];
    t.hidden[i] = std::max(t.pre[i], 0.0);
  }
  matvec(p.w2(), t.hidden, t.out);
  for (std::size_t i = 0; i < d; ++i) t.out[i] += p.b2()[i];
  t.norm = l2_norm(t.out);
  if (t.norm < kNormEpsilon) {
    throw NumericError("two-layer predictor produced a degenerate output (norm " +
                       std::to_string(t.norm) + " < 1e-12)");
  }
  for (double& x : t.out) x /= t.norm;
  return t;
}

// Accumulates dL/dtheta given dL/d(output) for one forward pass.
void backprop(const PhiModel& phi, std::span<const double> s, const ForwardTrace& t,
              std::span<const double> d_out, PhiGrads& g) {
  const std::size_t d = phi.dim();
  if (phi.variant() == PhiVariant::Linear) {
    auto gw = g.w();
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t c = 0; c < d; ++c) gw(r, c) += d_out[r] * s[c];
    }
    return;
  }
  const PhiParams& p = phi.params();
  // Through u / ||u||: du = (I - w w^T) d_out / ||u||, w = normalized output.
  const double proj = dot(t.out, d_out);
  std::vector<double> du(d);
  for (std::size_t i = 0; i < d; ++i) du[i] = (d_out[i] - t.out[i] * proj) / t.norm;

  auto gw2 = g.w2();
  auto gb2 = g.b2();
  for (std::size_t r = 0; r < d; ++r) {
    gb2[r] += du[r];
    for (std::size_t c = 0; c < d; ++c) gw2(r, c) += du[r] * t.hidden[c];
  }
  std::vector<double> dpre(d, 0.0);
  auto w2 = p.w2();
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < d; ++c) dpre[c] += w2(r, c) * du[r];
  }
  for (std::size_t i = 0; i < d; ++i) {
    if (t.pre[i] <= 0.0) dpre[i] = 0.0;
  }
  auto gw1 = g.w1();
  auto gb1 = g.b1();
  for (std::size_t r = 0; r < d; ++r) {
    gb1[r] += dpre[r];
    for (std::size_t c = 0; c < d; ++c) gw1(r, c) += dpre[r] * s[c];
  }
}

void check_batch(const PhiModel& phi, const StatisticSet& stats, const TrainingBatch& batch) {
  if (stats.categories != batch.categories) {
    throw ValidationError("statistic set and training batch cover different categories");
  }
  if (stats.size() < 2) throw ValidationError("episodic loss needs at least 2 categories");
  if (stats.stats.cols() != phi.dim() || batch.activations.cols() != phi.dim()) {
    throw ValidationError("statistic/batch dim does not match predictor dim " +
                          std::to_string(phi.dim()));
  }
}

}  // namespace

PhiParams::PhiParams(PhiVariant variant, std::size_t dim)
    : variant_(variant), dim_(dim), values_(count(variant, dim), 0.0) {
  if (dim == 0) throw ValidationError("predictor dim must be positive");
}

std::size_t PhiParams::count(PhiVariant variant, std::size_t dim) {
  return variant == PhiVariant::Linear ? dim * dim : 2 * dim * dim + 2 * dim;
}

PhiModel PhiModel::linear(Matrix w) {
  if (w.rows() != w.cols()) throw ValidationError("linear predictor matrix must be square");
  PhiParams p(PhiVariant::Linear, w.rows());
  std::copy(w.data().begin(), w.data().end(), p.values().begin());
  return PhiModel(std::move(p));
}

PhiModel PhiModel::linear_init(std::size_t dim, Rng& rng, double noise) {
  Matrix w = Matrix::identity(dim);
  for (double& x : w.data()) x += rng.normal(noise);
  return linear(std::move(w));
}

PhiModel PhiModel::two_layer_init(std::size_t dim, Rng& rng) {
  PhiParams p(PhiVariant::TwoLayer, dim);
  const double scale = std::sqrt(2.0 / static_cast<double>(dim));
  for (double& x : p.w1().data) x = rng.normal(scale);
  for (double& x : p.w2().data) x = rng.normal(scale);
  return PhiModel(std::move(p));
}

Matrix PhiModel::linear_matrix() const {
  if (variant() != PhiVariant::Linear) {
    throw ValidationError("matrix analysis requires a linear predictor; got a two-layer model");
  }
  Matrix m(dim(), dim());
  std::copy(params_.values().begin(), params_.values().end(), m.data().begin());
  return m;
}

std::vector<double> forward(const PhiModel& phi, std::span<const double> s) {
  return forward_traced(phi, s).out;
}

double score(const PhiModel& phi, std::span<const double> s, std::span<const double> a) {
  check_dim(phi, a, "activation");
  return dot(forward(phi, s), a);
}

double softmax_cross_entropy(std::span<const double> logits, std::size_t target) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - m);
  return m + std::log(z) - logits[target];
}

double squared_frobenius(const PhiParams& params) {
  double s = 0.0;
  for (double x : params.values()) s += x * x;
  return s;
}

double batch_loss(const PhiModel& phi, const StatisticSet& stats, const TrainingBatch& batch,
                  const LossConfig& cfg) {
  check_batch(phi, stats, batch);
  const std::size_t n = stats.size();
  Matrix weights(n, phi.dim());
  for (std::size_t c = 0; c < n; ++c) {
    auto w = forward(phi, stats.stats.row(c));
    std::copy(w.begin(), w.end(), weights.row(c).begin());
  }
  std::vector<double> logits(n);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < n; ++c) logits[c] = dot(weights.row(c), batch.activations.row(i));
    loss += softmax_cross_entropy(logits, i);
  }
  return loss + cfg.lambda * squared_frobenius(phi.params());
}

LossAndGrads batch_gradients(const PhiModel& phi, const StatisticSet& stats,
                             const TrainingBatch& batch, const LossConfig& cfg) {
  check_batch(phi, stats, batch);
  const std::size_t n = stats.size();
  const std::size_t d = phi.dim();
  std::vector<ForwardTrace> traces;
  traces.reserve(n);
  for (std::size_t c = 0; c < n; ++c) traces.push_back(forward_traced(phi, stats.stats.row(c)));

  // dL/d(predicted weight c) = sum_i (p_ic - [i == c]) a_i
  Matrix d_weights(n, d);
  std::vector<double> logits(n);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto a = batch.activations.row(i);
    for (std::size_t c = 0; c < n; ++c) logits[c] = dot(traces[c].out, a);
    loss += softmax_cross_entropy(logits, i);
    const double m = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double& l : logits) {
      l = std::exp(l - m);
      z += l;
    }
    for (std::size_t c = 0; c < n; ++c) {
      const double g = logits[c] / z - (c == i ? 1.0 : 0.0);
      auto dw = d_weights.row(c);
      for (std::size_t j = 0; j < d; ++j) dw[j] += g * a[j];
    }
  }

  LossAndGrads out{loss + cfg.lambda * squared_frobenius(phi.params()),
                   PhiGrads(phi.variant(), d)};
  for (std::size_t c = 0; c < n; ++c) {
    backprop(phi, stats.stats.row(c), traces[c], d_weights.row(c), out.grads);
  }
  auto theta = phi.params().values();
  auto g = out.grads.values();
  for (std::size_t k = 0; k < g.size(); ++k) g[k] += 2.0 * cfg.lambda * theta[k];
  return out;
}

std::uint64_t forward_call_count() { return g_forward_calls.load(std::memory_order_relaxed); }

}  // namespace fewshot
