// Serial reference kernels against their OpenMP counterparts.
// Arg(0) runs the serial path; Arg(n > 1) runs OpenMP with n threads.

#include <benchmark/benchmark.h>

#include "fewshot/data.hpp"
#include "fewshot/inference.hpp"
#include "fewshot/kernels.hpp"
#include "fewshot/rng.hpp"

using namespace fewshot;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (double& x : m.data()) x = rng.normal();
  return m;
}

kernels::ExecPolicy policy_of(const benchmark::State& state) {
  return {static_cast<int>(state.range(0))};
}

void BM_ScoreRows(benchmark::State& state) {
  const Matrix q = random_matrix(512, 256, 1), w = random_matrix(1000, 256, 2);
  const auto p = policy_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::score_rows(q, w, p));
}

void BM_GroupMax(benchmark::State& state) {
  const Matrix s = random_matrix(512, 1000, 3);
  std::vector<std::size_t> offsets;
  for (std::size_t r = 0; r <= 1000; r += 5) offsets.push_back(r);
  const auto p = policy_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::group_max(s, offsets, p));
}

void BM_ColumnAbsSum(benchmark::State& state) {
  const Matrix m = random_matrix(1024, 1024, 4);
  const auto p = policy_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::column_abs_sum(m, p));
}

void BM_Episodes(benchmark::State& state) {
  SyntheticSpec spec;
  spec.n_categories = 50;
  spec.dim = 64;
  const ActivationStore store = gen_synthetic(spec).store;
  const PhiModel phi = PhiModel::linear_identity(spec.dim);
  const auto p = policy_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(run_episodes(store, phi, 5, 1, 200, 7, p));
}

}  // namespace

BENCHMARK(BM_ScoreRows)->Arg(0)->Arg(2)->Arg(4);
BENCHMARK(BM_GroupMax)->Arg(0)->Arg(2)->Arg(4);
BENCHMARK(BM_ColumnAbsSum)->Arg(0)->Arg(2)->Arg(4);
BENCHMARK(BM_Episodes)->Arg(0)->Arg(2)->Arg(4);

BENCHMARK_MAIN();
