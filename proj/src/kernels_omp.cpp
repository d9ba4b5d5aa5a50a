#include <omp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>

#include "fewshot/kernels.hpp"

namespace fewshot::kernels::omp {

Matrix score_rows(const Matrix& queries, const Matrix& weights, int threads) {
  if (queries.cols() != weights.cols()) throw ValidationError("score_rows: dim mismatch");
  Matrix out(queries.rows(), weights.rows());
  const auto n = static_cast<std::ptrdiff_t>(queries.rows());
#pragma omp parallel for num_threads(threads) schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    auto q = queries.row(static_cast<std::size_t>(i));
    auto dst = out.row(static_cast<std::size_t>(i));
    for (std::size_t r = 0; r < weights.rows(); ++r) dst[r] = dot(q, weights.row(r));
  }
  return out;
}

Matrix group_max(const Matrix& scores, std::span<const std::size_t> offsets, int threads) {
  const std::size_t groups = offsets.empty() ? 0 : offsets.size() - 1;
  Matrix out(scores.rows(), groups);
  const auto n = static_cast<std::ptrdiff_t>(scores.rows());
#pragma omp parallel for num_threads(threads) schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    auto src = scores.row(static_cast<std::size_t>(i));
    auto dst = out.row(static_cast<std::size_t>(i));
    for (std::size_t g = 0; g < groups; ++g) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t r = offsets[g]; r < offsets[g + 1]; ++r) best = std::max(best, src[r]);
      dst[g] = best;
    }
  }
  return out;
}

std::vector<double> column_abs_sum(const Matrix& m, int threads) {
  std::vector<double> out(m.cols(), 0.0);
  const std::size_t cols = m.cols();
  constexpr std::size_t kBlock = 64;
  const auto n_blocks = static_cast<std::ptrdiff_t>((cols + kBlock - 1) / kBlock);
  // Blocks of columns per thread, rows swept contiguously; each column still
  // sums rows in ascending order.
#pragma omp parallel for num_threads(threads) schedule(static)
  for (std::ptrdiff_t b = 0; b < n_blocks; ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * kBlock;
    const std::size_t hi = std::min(cols, lo + kBlock);
    for (std::size_t i = 0; i < m.rows(); ++i) {
      const auto row = m.row(i);
      for (std::size_t j = lo; j < hi; ++j) out[j] += std::abs(row[j]);
    }
  }
  return out;
}

Matrix normalize_rows(const Matrix& m, int threads) {
  Matrix out = m;
  const auto n = static_cast<std::ptrdiff_t>(m.rows());
  std::atomic<std::ptrdiff_t> bad{-1};
#pragma omp parallel for num_threads(threads) schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    auto row = out.row(static_cast<std::size_t>(i));
    const double norm = l2_norm(row);
    if (norm == 0.0) {
      bad.store(i);
      continue;
    }
    for (double& x : row) x /= norm;
  }
  if (bad.load() >= 0) {
    throw ValidationError("row " + std::to_string(bad.load()) + " has zero norm");
  }
  return out;
}

}  // namespace fewshot::kernels::omp
