#pragma once

#include <cstddef>
#include <filesystem>
#include <ostream>
#include <vector>

#include "fewshot/common.hpp"
#include "fewshot/kernels.hpp"

namespace fewshot {

// Per input channel j: sum_i |M(i, j)|.
struct ImpactVector {
  std::vector<double> impacts;

  std::size_t size() const { return impacts.size(); }
};

ImpactVector channel_impact(const Matrix& m, kernels::ExecPolicy policy = {});

// Indices of the k largest entries, ties broken by ascending index.
std::vector<std::size_t> top_k_indices(const std::vector<double>& values, std::size_t k);

// |top-k(a) ∩ top-k(b)| / k
double order_similarity(const ImpactVector& a, const ImpactVector& b, std::size_t k);

struct DiagonalStats {
  double mean_diag_abs = 0.0;
  double mean_offdiag_abs = 0.0;
  double diag_min = 0.0;
  double diag_max = 0.0;
};

DiagonalStats diagonal_dominance(const Matrix& m);

// log10(|M(i, j)| + 1e-12) over the top-left n x n block.
using Grid = std::vector<std::vector<double>>;
Grid export_log_heatmap(const Matrix& m, std::size_t submatrix);

// Unit-sum and unit-L2 rescalings of an impact vector, plus their moments.
struct ImpactSummary {
  std::vector<double> sum_normalized;
  std::vector<double> l2_normalized;
  double sum_mean = 0.0, sum_std = 0.0;
  double l2_mean = 0.0, l2_std = 0.0;
};

ImpactSummary summarize_impacts(const ImpactVector& iv);

// %.17g CSV, one row per line.
void write_grid_csv(std::ostream& out, const Grid& grid);
Grid read_grid_csv(std::istream& in);
Matrix grid_to_matrix(const Grid& grid);

// One value per line, %.17g.
void write_values(std::ostream& out, const std::vector<double>& values);

}  // namespace fewshot
