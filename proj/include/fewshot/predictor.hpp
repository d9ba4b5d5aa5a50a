#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fewshot/common.hpp"
#include "fewshot/data.hpp"
#include "fewshot/rng.hpp"

namespace fewshot {

enum class PhiVariant : std::uint8_t { Linear = 1, TwoLayer = 2 };

// Row-major view of a dim x dim block inside a flat parameter buffer.
template <typename T>
struct SquareView {
  std::span<T> data;
  std::size_t dim;

  T& operator()(std::size_t r, std::size_t c) const { return data[r * dim + c]; }
  std::span<T> row(std::size_t r) const { return data.subspan(r * dim, dim); }
};

// Flat parameter layout shared by the model and its gradients:
//   Linear:   W
//   TwoLayer: W1, b1, W2, b2
// which is also the checkpoint field order.
class PhiParams {
 public:
  PhiParams() = default;
  PhiParams(PhiVariant variant, std::size_t dim);

  static std::size_t count(PhiVariant variant, std::size_t dim);

  PhiVariant variant() const { return variant_; }
  std::size_t dim() const { return dim_; }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  // Linear only.
  SquareView<double> w() { return {values_, dim_}; }
  SquareView<const double> w() const { return {values_, dim_}; }
  // TwoLayer only.
  SquareView<double> w1() { return {block(0, dim_ * dim_), dim_}; }
  SquareView<const double> w1() const { return {block(0, dim_ * dim_), dim_}; }
  std::span<double> b1() { return block(dim_ * dim_, dim_); }
  std::span<const double> b1() const { return block(dim_ * dim_, dim_); }
  SquareView<double> w2() { return {block(dim_ * dim_ + dim_, dim_ * dim_), dim_}; }
  SquareView<const double> w2() const { return {block(dim_ * dim_ + dim_, dim_ * dim_), dim_}; }
  std::span<double> b2() { return block(2 * dim_ * dim_ + dim_, dim_); }
  std::span<const double> b2() const { return block(2 * dim_ * dim_ + dim_, dim_); }

  bool same_shape(const PhiParams& o) const { return variant_ == o.variant_ && dim_ == o.dim_; }

  friend bool operator==(const PhiParams&, const PhiParams&) = default;

 private:
  std::span<double> block(std::size_t off, std::size_t n) { return std::span(values_).subspan(off, n); }
  std::span<const double> block(std::size_t off, std::size_t n) const {
    return std::span(values_).subspan(off, n);
  }

  PhiVariant variant_ = PhiVariant::Linear;
  std::size_t dim_ = 0;
  std::vector<double> values_;
};

// The parameter predictor: maps a category statistic to classifier weights.
class PhiModel {
 public:
  PhiModel() = default;
  explicit PhiModel(PhiParams params) : params_(std::move(params)) {}

  static PhiModel linear(Matrix w);
  static PhiModel linear_identity(std::size_t dim) { return linear(Matrix::identity(dim)); }
  // Identity plus N(0, noise^2) entries.
  static PhiModel linear_init(std::size_t dim, Rng& rng, double noise = 1e-3);
  // Zero biases, N(0, 2/dim) weights.
  static PhiModel two_layer_init(std::size_t dim, Rng& rng);

  PhiVariant variant() const { return params_.variant(); }
  std::size_t dim() const { return params_.dim(); }
  const PhiParams& params() const { return params_; }
  PhiParams& params() { return params_; }

  // Linear weight matrix as a Matrix copy; ValidationError for TwoLayer.
  Matrix linear_matrix() const;

  friend bool operator==(const PhiModel&, const PhiModel&) = default;

 private:
  PhiParams params_;
};

using PhiGrads = PhiParams;

struct LossConfig {
  double lambda = 1e-4;
};

// Guard for the unit-normalization divide of the two-layer output.
inline constexpr double kNormEpsilon = 1e-12;

std::vector<double> forward(const PhiModel& phi, std::span<const double> s);
double score(const PhiModel& phi, std::span<const double> s, std::span<const double> a);

// Per-sample term of the episodic loss: -logit[target] + logsumexp(logits).
double softmax_cross_entropy(std::span<const double> logits, std::size_t target);

double squared_frobenius(const PhiParams& params);

double batch_loss(const PhiModel& phi, const StatisticSet& stats, const TrainingBatch& batch,
                  const LossConfig& cfg);

struct LossAndGrads {
  double loss = 0.0;
  PhiGrads grads;
};

LossAndGrads batch_gradients(const PhiModel& phi, const StatisticSet& stats,
                             const TrainingBatch& batch, const LossConfig& cfg);

// Number of forward() evaluations since process start (all threads).
std::uint64_t forward_call_count();

std::vector<std::uint8_t> serialize_checkpoint(const PhiModel& phi);
PhiModel parse_checkpoint(std::span<const std::uint8_t> bytes);
void write_checkpoint(const std::filesystem::path& path, const PhiModel& phi);
PhiModel load_checkpoint(const std::filesystem::path& path);

// FNV-1a over the serialized checkpoint.
std::uint64_t model_digest(const PhiModel& phi);

}  // namespace fewshot
