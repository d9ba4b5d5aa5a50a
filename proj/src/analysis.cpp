#include "fewshot/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <string>
#include <tuple>

namespace fewshot {

ImpactVector channel_impact(const Matrix& m, kernels::ExecPolicy policy) {
  return {kernels::column_abs_sum(m, policy)};
}

std::vector<std::size_t> top_k_indices(const std::vector<double>& values, std::size_t k) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

double order_similarity(const ImpactVector& a, const ImpactVector& b, std::size_t k) {
  if (a.size() != b.size()) throw ValidationError("order similarity: impact vectors differ in length");
  if (k < 1 || k > a.size()) {
    throw ValidationError("order similarity: k = " + std::to_string(k) + " outside [1, " +
                          std::to_string(a.size()) + "]");
  }
  auto ta = top_k_indices(a.impacts, k);
  auto tb = top_k_indices(b.impacts, k);
  std::sort(ta.begin(), ta.end());
  std::sort(tb.begin(), tb.end());
  std::vector<std::size_t> common;
  std::set_intersection(ta.begin(), ta.end(), tb.begin(), tb.end(), std::back_inserter(common));
  return static_cast<double>(common.size()) / static_cast<double>(k);
}

DiagonalStats diagonal_dominance(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw ValidationError("diagonal dominance needs a non-empty square matrix");
  }
  const std::size_t d = m.rows();
  DiagonalStats st;
  st.diag_min = m(0, 0);
  st.diag_max = m(0, 0);
  double diag = 0.0, off = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      if (i == j) {
        diag += std::abs(m(i, i));
        st.diag_min = std::min(st.diag_min, m(i, i));
        st.diag_max = std::max(st.diag_max, m(i, i));
      } else {
        off += std::abs(m(i, j));
      }
    }
  }
  st.mean_diag_abs = diag / static_cast<double>(d);
  st.mean_offdiag_abs = d > 1 ? off / static_cast<double>(d * (d - 1)) : 0.0;
  return st;
}

Grid export_log_heatmap(const Matrix& m, std::size_t submatrix) {
  if (submatrix > m.rows() || submatrix > m.cols()) {
    throw ValidationError("heatmap submatrix " + std::to_string(submatrix) +
                          " exceeds matrix size");
  }
  Grid g(submatrix, std::vector<double>(submatrix));
  for (std::size_t i = 0; i < submatrix; ++i) {
    for (std::size_t j = 0; j < submatrix; ++j) g[i][j] = std::log10(std::abs(m(i, j)) + 1e-12);
  }
  return g;
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / n)};
}

}  // namespace

ImpactSummary summarize_impacts(const ImpactVector& iv) {
  if (iv.impacts.empty()) throw ValidationError("empty impact vector");
  ImpactSummary s;
  const double total = std::accumulate(iv.impacts.begin(), iv.impacts.end(), 0.0);
  double sq = 0.0;
  for (double x : iv.impacts) sq += x * x;
  const double l2 = std::sqrt(sq);
  if (total == 0.0) throw ValidationError("impact vector is all zero");
  for (double x : iv.impacts) {
    s.sum_normalized.push_back(x / total);
    s.l2_normalized.push_back(x / l2);
  }
  std::tie(s.sum_mean, s.sum_std) = mean_std(s.sum_normalized);
  std::tie(s.l2_mean, s.l2_std) = mean_std(s.l2_normalized);
  return s;
}

void write_grid_csv(std::ostream& out, const Grid& grid) {
  char buf[40];
  for (const auto& row : grid) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", row[j]);
      if (j) out << ',';
      out << buf;
    }
    out << '\n';
  }
}

Grid read_grid_csv(std::istream& in) {
  Grid g;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      auto f = rest.substr(0, comma);
      double v = 0.0;
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || p != f.data() + f.size()) {
        throw ValidationError("grid csv line " + std::to_string(line_no) + ": bad value '" +
                              std::string(f) + "'");
      }
      row.push_back(v);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (!g.empty() && row.size() != g.front().size()) {
      throw ValidationError("grid csv line " + std::to_string(line_no) + ": ragged row");
    }
    g.push_back(std::move(row));
  }
  return g;
}

Matrix grid_to_matrix(const Grid& grid) {
  Matrix m(0, grid.empty() ? 0 : grid.front().size());
  for (const auto& row : grid) m.append_row(row);
  return m;
}

void write_values(std::ostream& out, const std::vector<double>& values) {
  char buf[40];
  for (double v : values) {
    std::snprintf(buf, sizeof buf, "%.17g\n", v);
    out << buf;
  }
}

}  // namespace fewshot
