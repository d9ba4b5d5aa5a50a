#include "fewshot/trainer.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace fewshot {

namespace {
std::atomic<std::uint64_t> g_sgd_steps{0};
}

void TrainConfig::validate() const {
  if (!(lr >= 0.0)) throw ValidationError("train: lr must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("train: momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ValidationError("train: weight_decay must be >= 0");
  if (!(p_mean >= 0.0 && p_mean <= 1.0)) throw ValidationError("train: p_mean must be in [0, 1]");
  if (!(lambda >= 0.0)) throw ValidationError("train: lambda must be >= 0");
}

void sgd_step(PhiModel& phi, const PhiGrads& grads, OptimizerState& state, double lr,
              double momentum, double weight_decay) {
  auto theta = phi.params().values();
  auto g = grads.values();
  if (g.size() != theta.size() || state.velocity.size() != theta.size()) {
    throw ValidationError("sgd_step: gradient/state shape does not match the model");
  }
  g_sgd_steps.fetch_add(1, std::memory_order_relaxed);
  for (std::size_t k = 0; k < theta.size(); ++k) {
    double& v = state.velocity[k];
    v = momentum * v + g[k] + weight_decay * theta[k];
    theta[k] -= lr * v;
  }
}

std::uint64_t sgd_step_count() { return g_sgd_steps.load(std::memory_order_relaxed); }

TrainResult train(const ActivationStore& store_large, const TrainConfig& cfg, PhiModel init,
                  const TrainHooks& hooks) {
  cfg.validate();
  if (store_large.category_count() < 2) {
    throw ValidationError("train: store needs at least 2 categories");
  }
  if (store_large.dim() != init.dim()) {
    throw ValidationError("train: store dim " + std::to_string(store_large.dim()) +
                          " does not match predictor dim " + std::to_string(init.dim()));
  }
  using Clock = std::chrono::steady_clock;
  TrainResult result{std::move(init), {}};
  PhiModel& phi = result.model;
  OptimizerState state(phi);
  Rng rng(cfg.seed);
  const CategoryMeans means = compute_means(store_large);
  const std::vector<CategoryId> categories = store_large.categories();
  const LossConfig loss_cfg{cfg.lambda};
  const double p_mean = cfg.effective_p_mean();
  const double batch_size = static_cast<double>(categories.size());

  std::size_t iteration = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = Clock::now();
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < cfg.batches_per_epoch; ++b, ++iteration) {
      const StatisticSet stats = sample_statistic_set(store_large, means, categories, p_mean, rng);
      if (hooks.on_statistics) hooks.on_statistics(stats);
      const TrainingBatch batch = sample_training_batch(store_large, categories, rng);
      const LossAndGrads lg = batch_gradients(phi, stats, batch, loss_cfg);
      if (!std::isfinite(lg.loss)) {
        std::ostringstream msg;
        msg << "non-finite loss " << lg.loss << " at iteration " << iteration << " (epoch "
            << epoch << ", batch " << b << ")";
        throw NumericError(msg.str());
      }
      loss_sum += lg.loss / batch_size;
      sgd_step(phi, lg.grads, state, cfg.lr, cfg.momentum, cfg.weight_decay);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_loss = cfg.batches_per_epoch > 0 ? loss_sum / static_cast<double>(cfg.batches_per_epoch) : 0.0;
    rec.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    result.log.epochs.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec, phi);
  }
  result.log.final_digest = model_digest(phi);
  return result;
}

void write_train_log(std::ostream& out, const TrainLog& log) {
  char buf[96];
  for (const auto& r : log.epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.6f\n", r.epoch, r.mean_loss, r.seconds);
    out << buf;
  }
}

}  // namespace fewshot
