#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fewshot/analysis.hpp"
#include "fewshot/trainer.hpp"
#include "test_support.hpp"

using namespace fewshot;

TEST_CASE("channel_impact: closed forms") {
  for (double v : channel_impact(Matrix::identity(7)).impacts) CHECK(v == 1.0);
  Matrix m(2, 2);
  m(0, 0) = 1;
  m(0, 1) = -2;
  m(1, 0) = 3;
  m(1, 1) = 0;
  CHECK(channel_impact(m).impacts == std::vector<double>{4.0, 2.0});
}

TEST_CASE("channel_impact: double-loop oracle and scale equivariance") {
  Rng rng(1);
  for (int t = 0; t < 10; ++t) {
    const Matrix m = testsupport::random_matrix(3 + t, 2 + t, rng);
    const ImpactVector iv = channel_impact(m);
    for (std::size_t j = 0; j < m.cols(); ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < m.rows(); ++i) s += std::abs(m(i, j));
      CHECK(iv.impacts[j] == s);
    }
    // Power-of-two scale keeps every product exact.
    Matrix scaled = m;
    for (double& x : scaled.data()) x *= -4.0;
    const ImpactVector is = channel_impact(scaled);
    for (std::size_t j = 0; j < m.cols(); ++j) CHECK(is.impacts[j] == 4.0 * iv.impacts[j]);
  }
}

TEST_CASE("order_similarity: identities") {
  Rng rng(2);
  ImpactVector a{{}}, b{{}};
  for (int j = 0; j < 12; ++j) {
    a.impacts.push_back(std::abs(rng.normal()));
    b.impacts.push_back(std::abs(rng.normal()));
  }
  for (std::size_t k = 1; k <= 12; ++k) {
    CHECK(order_similarity(a, a, k) == 1.0);
    CHECK(order_similarity(a, b, k) == order_similarity(b, a, k));
  }
  CHECK(order_similarity(a, b, 12) == 1.0);

  ImpactVector up{{1, 2, 3, 4, 5, 6}}, down{{6, 5, 4, 3, 2, 1}};
  for (std::size_t k = 1; k <= 3; ++k) CHECK(order_similarity(up, down, k) == 0.0);

  CHECK_THROWS_AS(order_similarity(a, b, 0), ValidationError);
  CHECK_THROWS_AS(order_similarity(a, b, 13), ValidationError);
  CHECK_THROWS_AS(order_similarity(a, ImpactVector{{1.0}}, 1), ValidationError);
}

TEST_CASE("top_k_indices breaks ties by ascending index") {
  CHECK(top_k_indices({1.0, 3.0, 3.0, 2.0, 3.0}, 2) == std::vector<std::size_t>{1, 2});
}

TEST_CASE("order_similarity: random permutations average k/dim") {
  Rng rng(3);
  const std::size_t dim = 20;
  ImpactVector base{{}};
  for (std::size_t j = 0; j < dim; ++j) base.impacts.push_back(static_cast<double>(j) + 0.5);
  for (std::size_t k : {2, 5, 10}) {
    const int trials = 1000;
    double sum = 0.0;
    for (int t = 0; t < trials; ++t) {
      ImpactVector p = base;
      std::shuffle(p.impacts.begin(), p.impacts.end(), rng.engine());
      sum += order_similarity(base, p, k);
    }
    // Overlap is hypergeometric(dim, k, k).
    const double kd = static_cast<double>(k), n = static_cast<double>(dim);
    const double var_overlap = kd * (kd / n) * ((n - kd) / n) * ((n - kd) / (n - 1));
    const double sigma = std::sqrt(var_overlap) / kd / std::sqrt(double(trials));
    CHECK(std::abs(sum / trials - kd / n) <= 3.0 * sigma);
  }
}

TEST_CASE("diagonal_dominance: closed forms") {
  const DiagonalStats id = diagonal_dominance(Matrix::identity(4));
  CHECK(id.mean_diag_abs == 1.0);
  CHECK(id.mean_offdiag_abs == 0.0);
  CHECK(id.diag_min == 1.0);
  CHECK(id.diag_max == 1.0);
  const DiagonalStats ones = diagonal_dominance(Matrix(3, 3, 1.0));
  CHECK(ones.mean_diag_abs == 1.0);
  CHECK(ones.mean_offdiag_abs == 1.0);
  CHECK(ones.diag_min == 1.0);
  CHECK(ones.diag_max == 1.0);
  CHECK_THROWS_AS(diagonal_dominance(Matrix(2, 3)), ValidationError);
}

TEST_CASE("diagonal_dominance: trained linear predictor on the synthetic oracle") {
  SyntheticSpec spec;
  spec.n_categories = 20;
  spec.samples_per_category = 30;
  spec.dim = 16;
  spec.noise_sigma = 0.05;
  const auto data = gen_synthetic(spec);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batches_per_epoch = 50;
  Rng rng(1);
  const auto res = train(data.store, cfg, PhiModel::linear_init(16, rng));
  const DiagonalStats st = diagonal_dominance(res.model.linear_matrix());
  MESSAGE("diag " << st.mean_diag_abs << " offdiag " << st.mean_offdiag_abs);
  CHECK(st.mean_diag_abs > st.mean_offdiag_abs);
}

TEST_CASE("export_log_heatmap") {
  const Grid g = export_log_heatmap(Matrix::identity(3), 2);
  REQUIRE(g.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    REQUIRE(g[i].size() == 2);
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(g[i][j] == doctest::Approx(i == j ? 0.0 : -12.0).epsilon(1e-12));
    }
  }
  CHECK(export_log_heatmap(Matrix::identity(3), 0).empty());
  CHECK_THROWS_AS(export_log_heatmap(Matrix::identity(3), 4), ValidationError);

  Rng rng(4);
  const Grid r = export_log_heatmap(testsupport::random_matrix(6, 6, rng), 6);
  std::stringstream ss;
  write_grid_csv(ss, r);
  CHECK(read_grid_csv(ss) == r);
}

TEST_CASE("summarize_impacts: both normalizations") {
  const ImpactSummary s = summarize_impacts(ImpactVector{{3.0, 4.0}});
  CHECK(s.sum_normalized[0] == doctest::Approx(3.0 / 7.0));
  CHECK(s.l2_normalized[1] == doctest::Approx(0.8));
  CHECK(s.sum_mean == doctest::Approx(0.5));
  const ImpactSummary u = summarize_impacts(channel_impact(Matrix::identity(4)));
  CHECK(u.sum_std == 0.0);
  CHECK(u.l2_mean == doctest::Approx(0.5));
}
