#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "fewshot/data.hpp"
#include "oracles.hpp"

using namespace fewshot;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "fewshot_test_data";
  fs::create_directories(dir);
  return dir / name;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

std::vector<std::uint8_t> actv_header(std::uint32_t n, std::uint32_t dim) {
  std::vector<std::uint8_t> b{'A', 'C', 'T', 'V'};
  for (std::uint32_t v : {1u, n, dim})
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  return b;
}

ActivationStore small_store() {
  StoreBuilder b(2);
  b.add(3, std::vector<double>{1.0, 0.0});
  b.add(3, std::vector<double>{0.0, 1.0});
  b.add(7, std::vector<double>{2.0, 2.0});
  return std::move(b).build();
}

}  // namespace

TEST_CASE("load_store: minimal CSV") {
  const auto p = temp_file("min.csv");
  write_text(p, "0,1.0,0.0\n1,0.0,1.0\n");
  const ActivationStore s = load_store(p, StoreFormat::Csv);
  CHECK(s.dim() == 2);
  CHECK(s.category_count() == 2);
  CHECK(s.positions(0).size() == 1);
  CHECK(s.positions(1).size() == 1);
  CHECK(s.row(1)[1] == 1.0);
}

TEST_CASE("load_store: CSV errors carry the line number") {
  const auto p = temp_file("bad.csv");
  write_text(p, "0,1.0,0.0\n1,0.0\n");
  CHECK_THROWS_WITH_AS(load_store(p, StoreFormat::Csv), doctest::Contains(":2: dimension mismatch"), ValidationError);
  write_text(p, "0,1.0,x\n");
  CHECK_THROWS_WITH_AS(load_store(p, StoreFormat::Csv), doctest::Contains(":1: bad value"), ValidationError);
  write_text(p, "");
  CHECK_THROWS_WITH_AS(load_store(p, StoreFormat::Csv), doctest::Contains("empty file"), ValidationError);
}

TEST_CASE("parse_binary_store: header errors") {
  CHECK_THROWS_WITH_AS(parse_binary_store(actv_header(0, 4)), doctest::Contains("empty file"), ValidationError);
  CHECK_THROWS_WITH_AS(parse_binary_store(std::vector<std::uint8_t>{}), doctest::Contains("empty file"), ValidationError);

  // Declared dim 4, payload holds 2 records of dim 3.
  auto b = actv_header(2, 4);
  b.resize(b.size() + 2 * (4 + 3 * 4), 0);
  CHECK_THROWS_WITH_AS(parse_binary_store(b), doctest::Contains("dimension mismatch"), ValidationError);
  CHECK_THROWS_WITH_AS(parse_binary_store(b), doctest::Contains("payload implies dim=3"), ValidationError);

  auto m = actv_header(1, 1);
  m.resize(m.size() + 8, 0);
  m[1] = 'X';
  CHECK_THROWS_WITH_AS(parse_binary_store(m), doctest::Contains("malformed header"), ValidationError);
  CHECK_THROWS_WITH_AS(parse_binary_store(m), doctest::Contains("at byte 0"), ValidationError);
}

TEST_CASE("binary round trip is byte-identical") {
  SyntheticSpec spec;
  spec.n_categories = 4;
  spec.samples_per_category = 3;
  spec.dim = 5;
  const auto data = gen_synthetic(spec);
  const auto path = temp_file("rt.bin");
  write_store(path, data.store);
  const ActivationStore loaded = load_store(path, StoreFormat::Binary);
  CHECK(serialize_binary_store(loaded) == serialize_binary_store(data.store));
  const auto path2 = temp_file("rt2.bin");
  write_store(path2, loaded);
  CHECK(load_store(path2, StoreFormat::Binary) == loaded);
  CHECK(loaded.labels().size() == 12);
}

TEST_CASE("store invariants") {
  const ActivationStore s = small_store();
  CHECK(s.categories() == std::vector<CategoryId>{3, 7});
  CHECK(s.positions(3) == std::vector<std::size_t>{0, 1});
  CHECK_THROWS_AS(s.positions(4), ValidationError);
  CHECK_THROWS_AS(ActivationStore(2, {1, 2}, std::vector<double>(3)), ValidationError);
}

TEST_CASE("compute_means") {
  const CategoryMeans m = compute_means(small_store());
  CHECK(m.at(3) == std::vector<double>{0.5, 0.5});
  CHECK(m.at(7) == std::vector<double>{2.0, 2.0});
}

TEST_CASE("compute_means: noise-free synthetic data recovers regenerated centers") {
  SyntheticSpec spec;
  spec.n_categories = 6;
  spec.samples_per_category = 4;
  spec.dim = 5;
  spec.center_scale = 2.5;
  spec.noise_sigma = 0.0;
  spec.normalize = false;
  spec.seed = 99;
  const auto data = gen_synthetic(spec);
  // Regenerate: centers are the first n_categories * dim normal draws.
  Rng rng(spec.seed);
  const CategoryMeans means = compute_means(data.store);
  for (CategoryId y = 0; y < spec.n_categories; ++y) {
    for (std::size_t j = 0; j < spec.dim; ++j) {
      const double c = spec.center_scale * rng.normal();
      CHECK(means.at(y)[j] == doctest::Approx(c).epsilon(1e-12));
    }
  }
}

TEST_CASE("compute_means matches a long-double reference summation") {
  SyntheticSpec spec;
  spec.samples_per_category = 50;
  spec.dim = 32;
  spec.normalize = false;
  spec.noise_sigma = 3.0;
  const auto data = gen_synthetic(spec);
  const CategoryMeans means = compute_means(data.store);
  for (CategoryId y : data.store.categories()) {
    const auto& pos = data.store.positions(y);
    for (std::size_t j = 0; j < spec.dim; ++j) {
      long double s = 0.0L;
      for (std::size_t p : pos) s += data.store.row(p)[j];
      const double ref = static_cast<double>(s / pos.size());
      CHECK(std::abs(means.at(y)[j] - ref) <= 1e-9 * std::max(1.0, std::abs(ref)));
    }
  }
}

TEST_CASE("gen_synthetic: zero noise, normalization, determinism") {
  SyntheticSpec spec;
  spec.n_categories = 3;
  spec.samples_per_category = 4;
  spec.dim = 6;
  spec.noise_sigma = 0.0;
  spec.normalize = false;
  const auto a = gen_synthetic(spec);
  for (std::size_t p = 0; p < a.store.size(); ++p) {
    const auto& c = a.centers.at(a.store.category(p));
    CHECK(std::equal(c.begin(), c.end(), a.store.row(p).begin()));
  }
  spec.noise_sigma = 0.3;
  spec.normalize = true;
  const auto b = gen_synthetic(spec);
  for (std::size_t p = 0; p < b.store.size(); ++p) CHECK(std::abs(l2_norm(b.store.row(p)) - 1.0) <= 1e-9);
  CHECK(serialize_binary_store(gen_synthetic(spec).store) == serialize_binary_store(b.store));
  CHECK(gen_synthetic(spec).store == b.store);

  spec.n_categories = 1;
  CHECK_THROWS_AS(gen_synthetic(spec), ValidationError);
}

TEST_CASE("sample_statistic_set: provenance rules") {
  SyntheticSpec spec;
  spec.n_categories = 5;
  spec.samples_per_category = 6;
  spec.dim = 3;
  const auto data = gen_synthetic(spec);
  const CategoryMeans means = compute_means(data.store);
  const auto cats = data.store.categories();
  Rng rng(1);

  const StatisticSet all_mean = sample_statistic_set(data.store, means, cats, 1.0, rng);
  for (std::size_t i = 0; i < all_mean.size(); ++i) {
    CHECK(all_mean.provenance[i].source == StatisticSource::Mean);
    const auto& m = means.at(all_mean.categories[i]);
    CHECK(std::equal(m.begin(), m.end(), all_mean.stats.row(i).begin()));  // bit-equal
  }
  const StatisticSet all_sample = sample_statistic_set(data.store, means, cats, 0.0, rng);
  for (std::size_t i = 0; i < all_sample.size(); ++i) {
    const Provenance pv = all_sample.provenance[i];
    CHECK(pv.source == StatisticSource::Sample);
    CHECK(data.store.category(pv.position) == all_sample.categories[i]);
    CHECK(std::equal(all_sample.stats.row(i).begin(), all_sample.stats.row(i).end(), data.store.row(pv.position).begin()));
  }

  StoreBuilder one(3);
  one.add(4, std::vector<double>{1, 2, 3});
  const ActivationStore s1 = std::move(one).build();
  const StatisticSet only = sample_statistic_set(s1, compute_means(s1), std::vector<CategoryId>{4}, 0.0, rng);
  CHECK(only.provenance[0] == Provenance{StatisticSource::Sample, 0});

  CHECK_THROWS_AS(sample_statistic_set(data.store, means, std::vector<CategoryId>{42}, 0.5, rng), ValidationError);
  CHECK_THROWS_AS(sample_statistic_set(data.store, means, cats, 1.5, rng), ValidationError);
}

TEST_CASE("sample_statistic_set: mean fraction at p_mean = 0.9") {
  const ActivationStore s = small_store();
  const CategoryMeans means = compute_means(s);
  Rng rng(2024);
  int mean_draws = 0;
  for (int t = 0; t < 10000; ++t) {
    const auto set = sample_statistic_set(s, means, std::vector<CategoryId>{3}, 0.9, rng);
    mean_draws += set.provenance[0].source == StatisticSource::Mean;
  }
  // Binomial sd is 0.003; the band is about 6.7 sd wide on each side.
  CHECK(mean_draws / 10000.0 >= 0.88);
  CHECK(mean_draws / 10000.0 <= 0.92);
}

TEST_CASE("sample_statistic_set: empirical mean converges to the category mean") {
  SyntheticSpec spec;
  spec.n_categories = 2;
  spec.samples_per_category = 7;
  spec.dim = 4;
  spec.noise_sigma = 0.5;
  spec.normalize = false;
  const auto data = gen_synthetic(spec);
  const CategoryMeans means = compute_means(data.store);
  Rng rng(77);
  const int draws = 10000;
  const double p_mean = 0.9;
  std::vector<double> acc(spec.dim, 0.0);
  const std::vector<CategoryId> cat{0};
  for (int t = 0; t < draws; ++t) {
    const auto set = sample_statistic_set(data.store, means, cat, p_mean, rng);
    for (std::size_t j = 0; j < spec.dim; ++j) acc[j] += set.stats(0, j);
  }
  const auto& pos = data.store.positions(0);
  for (std::size_t j = 0; j < spec.dim; ++j) {
    const double mu = means.at(0)[j];
    double var = 0.0;  // variance of one draw: (1 - p_mean) * population variance
    for (std::size_t p : pos) var += (data.store.row(p)[j] - mu) * (data.store.row(p)[j] - mu);
    var = (1.0 - p_mean) * var / pos.size();
    CHECK(std::abs(acc[j] / draws - mu) <= 3.0 * std::sqrt(var / draws));
  }
}

TEST_CASE("sample_training_batch") {
  const ActivationStore s = small_store();
  Rng rng(5);
  const auto b = sample_training_batch(s, std::vector<CategoryId>{7, 3}, rng);
  CHECK(b.size() == 2);
  CHECK(b.categories == std::vector<CategoryId>{3, 7});
  CHECK(b.positions[1] == 2);

  StoreBuilder four(1);
  for (int i = 0; i < 4; ++i) four.add(0, std::vector<double>{double(i)});
  const ActivationStore s4 = std::move(four).build();
  std::vector<int> hits(4, 0);
  for (int t = 0; t < 10000; ++t) ++hits[sample_training_batch(s4, std::vector<CategoryId>{0}, rng).positions[0]];
  for (int h : hits) {
    CHECK(h / 10000.0 >= 0.23);
    CHECK(h / 10000.0 <= 0.27);
  }
  CHECK_THROWS_AS(sample_training_batch(s, std::vector<CategoryId>{5}, rng), ValidationError);
}

TEST_CASE("sampling is deterministic given the seed") {
  SyntheticSpec spec;
  const auto data = gen_synthetic(spec);
  const auto means = compute_means(data.store);
  const auto cats = data.store.categories();
  Rng r1(9), r2(9);
  const auto a = sample_statistic_set(data.store, means, cats, 0.5, r1);
  const auto b = sample_statistic_set(data.store, means, cats, 0.5, r2);
  CHECK(a.provenance == b.provenance);
  CHECK(a.stats == b.stats);
}

TEST_CASE("split_store") {
  SyntheticSpec spec;
  spec.n_categories = 4;
  spec.samples_per_category = 5;
  spec.dim = 3;
  const auto data = gen_synthetic(spec);
  Rng rng(3);

  const StoreSplit sp = split_store(data.store, std::vector<CategoryId>{2, 3}, 1, rng);
  CHECK(sp.few_train.size() == 2);
  CHECK(sp.few_test.size() == 8);
  CHECK(sp.large.size() == 10);
  CHECK(sp.few_train.positions(2).size() == 1);
  CHECK(sp.few_test.positions(2).size() == 4);
  CHECK(sp.large.categories() == std::vector<CategoryId>{0, 1});

  // Partition: every original row appears exactly once across the three parts.
  std::multiset<std::vector<double>> orig, parts;
  for (std::size_t p = 0; p < data.store.size(); ++p) orig.insert(oracle::store_row(data.store, p));
  for (const auto* s : {&sp.large, &sp.few_train, &sp.few_test})
    for (std::size_t p = 0; p < s->size(); ++p) parts.insert(oracle::store_row(*s, p));
  CHECK(orig == parts);

  const StoreSplit none = split_store(data.store, {}, 1, rng);
  CHECK(none.large == data.store);
  CHECK(none.few_train.empty());
  CHECK(none.few_test.empty());

  CHECK_THROWS_WITH_AS(split_store(data.store, std::vector<CategoryId>{1}, 5, rng), doctest::Contains("need more than 5"),
                       ValidationError);
}
