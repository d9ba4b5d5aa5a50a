#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "fewshot/common.hpp"
#include "fewshot/rng.hpp"

namespace fewshot {

// Labeled activation vectors with a per-category index. Immutable once built.
class ActivationStore {
 public:
  ActivationStore() = default;
  // `values` is row-major, labels.size() rows of `dim` entries.
  ActivationStore(std::size_t dim, std::vector<CategoryId> labels, std::vector<double> values);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }

  CategoryId category(std::size_t pos) const { return labels_[pos]; }
  std::span<const double> row(std::size_t pos) const {
    return {values_.data() + pos * dim_, dim_};
  }
  std::span<const CategoryId> labels() const { return labels_; }
  std::span<const double> values() const { return values_; }

  // Ascending.
  std::vector<CategoryId> categories() const;
  std::size_t category_count() const { return index_.size(); }
  bool contains(CategoryId y) const { return index_.contains(y); }
  // Positions in file order. Throws ValidationError for an unknown category.
  const std::vector<std::size_t>& positions(CategoryId y) const;

  friend bool operator==(const ActivationStore& a, const ActivationStore& b) {
    return a.dim_ == b.dim_ && a.labels_ == b.labels_ && a.values_ == b.values_;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<CategoryId> labels_;
  std::vector<double> values_;
  std::map<CategoryId, std::vector<std::size_t>> index_;
};

// Incrementally assembles a store.
class StoreBuilder {
 public:
  explicit StoreBuilder(std::size_t dim) : dim_(dim) {}
  void add(CategoryId y, std::span<const double> v);
  ActivationStore build() &&;

 private:
  std::size_t dim_;
  std::vector<CategoryId> labels_;
  std::vector<double> values_;
};

struct CategoryMeans {
  std::size_t dim = 0;
  std::map<CategoryId, std::vector<double>> means;

  const std::vector<double>& at(CategoryId y) const;
};

enum class StatisticSource { Mean, Sample };

struct Provenance {
  StatisticSource source = StatisticSource::Mean;
  std::size_t position = 0;  // store position when source == Sample

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

// One statistic vector per category; row i of `stats` belongs to categories[i].
struct StatisticSet {
  std::vector<CategoryId> categories;  // ascending, unique
  Matrix stats;
  std::vector<Provenance> provenance;

  std::size_t size() const { return categories.size(); }
};

// One activation per category, same layout as StatisticSet.
struct TrainingBatch {
  std::vector<CategoryId> categories;  // ascending, unique
  Matrix activations;
  std::vector<std::size_t> positions;

  std::size_t size() const { return categories.size(); }
};

struct SyntheticSpec {
  std::size_t n_categories = 25;
  std::size_t samples_per_category = 30;
  std::size_t dim = 16;
  double center_scale = 1.0;
  double noise_sigma = 0.05;
  bool normalize = true;
  std::uint64_t seed = 20170613;

  void validate() const;
};

struct SyntheticData {
  ActivationStore store;
  std::map<CategoryId, std::vector<double>> centers;
};

struct StoreSplit {
  ActivationStore large;
  ActivationStore few_train;
  ActivationStore few_test;
};

enum class StoreFormat { Binary, Csv };

ActivationStore load_store(const std::filesystem::path& path, StoreFormat format);
ActivationStore parse_binary_store(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> serialize_binary_store(const ActivationStore& store);
void write_store(const std::filesystem::path& path, const ActivationStore& store);

CategoryMeans compute_means(const ActivationStore& store);

StatisticSet sample_statistic_set(const ActivationStore& store, const CategoryMeans& means,
                                  std::span<const CategoryId> categories, double p_mean,
                                  Rng& rng);

TrainingBatch sample_training_batch(const ActivationStore& store,
                                    std::span<const CategoryId> categories, Rng& rng);

SyntheticData gen_synthetic(const SyntheticSpec& spec);

StoreSplit split_store(const ActivationStore& store, std::span<const CategoryId> few_categories,
                       std::size_t shots, Rng& rng);

// Samples of `a` followed by samples of `b`; dims must agree.
ActivationStore concat_stores(const ActivationStore& a, const ActivationStore& b);

// Keeps only samples whose category is in `keep`.
ActivationStore filter_store(const ActivationStore& store, std::span<const CategoryId> keep);

}  // namespace fewshot
