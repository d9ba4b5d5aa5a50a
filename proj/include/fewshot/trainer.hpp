#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "fewshot/data.hpp"
#include "fewshot/predictor.hpp"

namespace fewshot {

enum class TrainMode { Mixed, MeanOnly };

// Defaults follow the reference ImageNet setup (lr 1e-3, momentum 0.9,
// weight decay 5e-4, p_mean 0.9, 300 x 250 batches).
struct TrainConfig {
  std::size_t epochs = 300;
  std::size_t batches_per_epoch = 250;
  double lr = 0.001;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  double p_mean = 0.9;
  double lambda = 1e-4;
  std::uint64_t seed = 20170613;
  TrainMode mode = TrainMode::Mixed;

  // MeanOnly forces 1.
  double effective_p_mean() const { return mode == TrainMode::MeanOnly ? 1.0 : p_mean; }
  void validate() const;
};

struct OptimizerState {
  std::vector<double> velocity;

  explicit OptimizerState(const PhiModel& phi) : velocity(phi.params().values().size(), 0.0) {}
};

struct EpochRecord {
  std::size_t epoch = 0;     // 1-based
  double mean_loss = 0.0;    // mean over batches of (batch loss / batch size)
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::uint64_t final_digest = 0;
};

// Observation points for instrumentation; all optional.
struct TrainHooks {
  std::function<void(const StatisticSet&)> on_statistics;
  std::function<void(const EpochRecord&, const PhiModel&)> on_epoch;
};

// v <- momentum*v + grads + weight_decay*theta; theta <- theta - lr*v
void sgd_step(PhiModel& phi, const PhiGrads& grads, OptimizerState& state, double lr,
              double momentum, double weight_decay);

// Number of sgd_step calls since process start.
std::uint64_t sgd_step_count();

struct TrainResult {
  PhiModel model;
  TrainLog log;
};

TrainResult train(const ActivationStore& store_large, const TrainConfig& cfg, PhiModel init,
                  const TrainHooks& hooks = {});

// "epoch,mean_loss,seconds" lines.
void write_train_log(std::ostream& out, const TrainLog& log);

}  // namespace fewshot
