#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fewshot/common.hpp"

// Dense scoring kernels. `serial` is the reference implementation; `omp` runs
// the same arithmetic in the same per-element order, so both produce
// bit-identical output.
namespace fewshot::kernels {

struct ExecPolicy {
  int threads = 1;

  bool parallel() const { return threads > 1; }
};

namespace serial {

// out(i, r) = queries.row(i) . weights.row(r)
Matrix score_rows(const Matrix& queries, const Matrix& weights);

// out(i, g) = max_{r in [offsets[g], offsets[g+1])} scores(i, r)
Matrix group_max(const Matrix& scores, std::span<const std::size_t> offsets);

// out[j] = sum_i |m(i, j)|
std::vector<double> column_abs_sum(const Matrix& m);

// Row-wise unit normalization; ValidationError on a zero row.
Matrix normalize_rows(const Matrix& m);

}  // namespace serial

namespace omp {

Matrix score_rows(const Matrix& queries, const Matrix& weights, int threads);
Matrix group_max(const Matrix& scores, std::span<const std::size_t> offsets, int threads);
std::vector<double> column_abs_sum(const Matrix& m, int threads);
Matrix normalize_rows(const Matrix& m, int threads);

}  // namespace omp

inline Matrix score_rows(const Matrix& queries, const Matrix& weights, ExecPolicy p) {
  return p.parallel() ? omp::score_rows(queries, weights, p.threads)
                      : serial::score_rows(queries, weights);
}
inline Matrix group_max(const Matrix& scores, std::span<const std::size_t> offsets, ExecPolicy p) {
  return p.parallel() ? omp::group_max(scores, offsets, p.threads)
                      : serial::group_max(scores, offsets);
}
inline std::vector<double> column_abs_sum(const Matrix& m, ExecPolicy p) {
  return p.parallel() ? omp::column_abs_sum(m, p.threads) : serial::column_abs_sum(m);
}
inline Matrix normalize_rows(const Matrix& m, ExecPolicy p) {
  return p.parallel() ? omp::normalize_rows(m, p.threads) : serial::normalize_rows(m);
}

}  // namespace fewshot::kernels
