#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fewshot/kernels.hpp"

namespace fewshot::kernels::serial {

Matrix score_rows(const Matrix& queries, const Matrix& weights) {
  if (queries.cols() != weights.cols()) throw ValidationError("score_rows: dim mismatch");
  Matrix out(queries.rows(), weights.rows());
  for (std::size_t i = 0; i < queries.rows(); ++i) {
    auto q = queries.row(i);
    for (std::size_t r = 0; r < weights.rows(); ++r) out(i, r) = dot(q, weights.row(r));
  }
  return out;
}

Matrix group_max(const Matrix& scores, std::span<const std::size_t> offsets) {
  const std::size_t groups = offsets.empty() ? 0 : offsets.size() - 1;
  Matrix out(scores.rows(), groups);
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    for (std::size_t g = 0; g < groups; ++g) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t r = offsets[g]; r < offsets[g + 1]; ++r) best = std::max(best, scores(i, r));
      out(i, g) = best;
    }
  }
  return out;
}

std::vector<double> column_abs_sum(const Matrix& m) {
  std::vector<double> out(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out[j] += std::abs(m(i, j));
  }
  return out;
}

Matrix normalize_rows(const Matrix& m) {
  Matrix out = m;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double n = l2_norm(m.row(i));
    if (n == 0.0) throw ValidationError("row " + std::to_string(i) + " has zero norm");
    for (double& x : out.row(i)) x /= n;
  }
  return out;
}

}  // namespace fewshot::kernels::serial
