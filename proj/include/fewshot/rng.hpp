#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace fewshot {

// Seeded random source. Every sampling routine takes one of these explicitly so
// runs are reproducible and parallel callers can hold independent streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform integer in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n) {
    std::uniform_int_distribution<std::size_t> dist(0, n - 1);
    return dist(engine_);
  }

  bool bernoulli(double p) {
    std::bernoulli_distribution dist(p);
    return dist(engine_);
  }

  double normal(double stddev = 1.0) {
    return normal_(engine_, std::normal_distribution<double>::param_type(0.0, stddev));
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace fewshot
