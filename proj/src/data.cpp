#include "fewshot/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

namespace fewshot {

ActivationStore::ActivationStore(std::size_t dim, std::vector<CategoryId> labels,
                                 std::vector<double> values)
    : dim_(dim), labels_(std::move(labels)), values_(std::move(values)) {
  if (dim_ == 0) throw ValidationError("activation store: dim must be positive");
  if (values_.size() != labels_.size() * dim_) {
    throw ValidationError("activation store: " + std::to_string(values_.size()) +
                          " values do not fill " + std::to_string(labels_.size()) +
                          " samples of dim " + std::to_string(dim_));
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) index_[labels_[i]].push_back(i);
}

std::vector<CategoryId> ActivationStore::categories() const {
  std::vector<CategoryId> out;
  out.reserve(index_.size());
  for (const auto& [y, _] : index_) out.push_back(y);
  return out;
}

const std::vector<std::size_t>& ActivationStore::positions(CategoryId y) const {
  auto it = index_.find(y);
  if (it == index_.end()) throw ValidationError("unknown category id " + std::to_string(y));
  return it->second;
}

void StoreBuilder::add(CategoryId y, std::span<const double> v) {
  if (v.size() != dim_) {
    throw ValidationError("store builder: vector of length " + std::to_string(v.size()) +
                          " in a store of dim " + std::to_string(dim_));
  }
  labels_.push_back(y);
  values_.insert(values_.end(), v.begin(), v.end());
}

ActivationStore StoreBuilder::build() && {
  return ActivationStore(dim_, std::move(labels_), std::move(values_));
}

const std::vector<double>& CategoryMeans::at(CategoryId y) const {
  auto it = means.find(y);
  if (it == means.end()) throw ValidationError("no mean for category " + std::to_string(y));
  return it->second;
}

CategoryMeans compute_means(const ActivationStore& store) {
  CategoryMeans out;
  out.dim = store.dim();
  for (CategoryId y : store.categories()) {
    const auto& pos = store.positions(y);
    std::vector<double> sum(store.dim(), 0.0);
    for (std::size_t p : pos) {
      auto v = store.row(p);
      for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += v[j];
    }
    const double n = static_cast<double>(pos.size());
    for (double& x : sum) x /= n;
    out.means.emplace(y, std::move(sum));
  }
  return out;
}

namespace {

std::vector<CategoryId> sorted_unique(std::span<const CategoryId> categories) {
  std::vector<CategoryId> out(categories.begin(), categories.end());
  std::sort(out.begin(), out.end());
  if (std::adjacent_find(out.begin(), out.end()) != out.end()) {
    throw ValidationError("category list contains duplicates");
  }
  return out;
}

}  // namespace

StatisticSet sample_statistic_set(const ActivationStore& store, const CategoryMeans& means,
                                  std::span<const CategoryId> categories, double p_mean,
                                  Rng& rng) {
  if (!(p_mean >= 0.0 && p_mean <= 1.0)) {
    throw ValidationError("p_mean must lie in [0, 1], got " + std::to_string(p_mean));
  }
  StatisticSet set;
  set.categories = sorted_unique(categories);
  set.stats = Matrix(0, store.dim());
  set.provenance.reserve(set.categories.size());
  for (CategoryId y : set.categories) {
    const auto& pos = store.positions(y);
    if (rng.bernoulli(p_mean)) {
      set.stats.append_row(means.at(y));
      set.provenance.push_back({StatisticSource::Mean, 0});
    } else {
      const std::size_t p = pos[rng.uniform_index(pos.size())];
      set.stats.append_row(store.row(p));
      set.provenance.push_back({StatisticSource::Sample, p});
    }
  }
  return set;
}

TrainingBatch sample_training_batch(const ActivationStore& store,
                                    std::span<const CategoryId> categories, Rng& rng) {
  TrainingBatch batch;
  batch.categories = sorted_unique(categories);
  batch.activations = Matrix(0, store.dim());
  for (CategoryId y : batch.categories) {
    const auto& pos = store.positions(y);
    const std::size_t p = pos[rng.uniform_index(pos.size())];
    batch.activations.append_row(store.row(p));
    batch.positions.push_back(p);
  }
  return batch;
}

void SyntheticSpec::validate() const {
  if (n_categories < 2) throw ValidationError("synthetic spec: n_categories must be >= 2");
  if (samples_per_category < 1) {
    throw ValidationError("synthetic spec: samples_per_category must be >= 1");
  }
  if (dim < 2) throw ValidationError("synthetic spec: dim must be >= 2");
  if (!(noise_sigma >= 0.0)) throw ValidationError("synthetic spec: noise_sigma must be >= 0");
  if (!std::isfinite(center_scale)) throw ValidationError("synthetic spec: center_scale must be finite");
}

SyntheticData gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  SyntheticData out;
  // All centers first, then samples category by category.
  for (std::size_t c = 0; c < spec.n_categories; ++c) {
    std::vector<double> center(spec.dim);
    for (double& x : center) x = spec.center_scale * rng.normal();
    out.centers.emplace(static_cast<CategoryId>(c), std::move(center));
  }
  StoreBuilder builder(spec.dim);
  std::vector<double> v(spec.dim);
  for (const auto& [y, center] : out.centers) {
    for (std::size_t s = 0; s < spec.samples_per_category; ++s) {
      for (std::size_t j = 0; j < spec.dim; ++j) {
        v[j] = center[j] + (spec.noise_sigma > 0.0 ? rng.normal(spec.noise_sigma) : 0.0);
      }
      if (spec.normalize) {
        const double n = l2_norm(v);
        if (n == 0.0) throw NumericError("synthetic sample with zero norm cannot be normalized");
        for (double& x : v) x /= n;
      }
      builder.add(y, v);
    }
  }
  out.store = std::move(builder).build();
  return out;
}

StoreSplit split_store(const ActivationStore& store, std::span<const CategoryId> few_categories,
                       std::size_t shots, Rng& rng) {
  if (shots < 1) throw ValidationError("split: shots must be >= 1");
  const std::vector<CategoryId> few = sorted_unique(few_categories);
  for (CategoryId y : few) {
    const std::size_t n = store.positions(y).size();
    if (n <= shots) {
      throw ValidationError("split: category " + std::to_string(y) + " has " + std::to_string(n) +
                            " samples, need more than " + std::to_string(shots) + " for " +
                            std::to_string(shots) + "-shot split");
    }
  }
  // Positions chosen as shots, per few category.
  std::set<std::size_t> shot_positions;
  for (CategoryId y : few) {
    std::vector<std::size_t> pos = store.positions(y);
    for (std::size_t i = 0; i < shots; ++i) {
      const std::size_t j = i + rng.uniform_index(pos.size() - i);
      std::swap(pos[i], pos[j]);
      shot_positions.insert(pos[i]);
    }
  }
  StoreBuilder large(store.dim()), train(store.dim()), test(store.dim());
  for (std::size_t p = 0; p < store.size(); ++p) {
    const CategoryId y = store.category(p);
    if (!std::binary_search(few.begin(), few.end(), y)) {
      large.add(y, store.row(p));
    } else if (shot_positions.contains(p)) {
      train.add(y, store.row(p));
    } else {
      test.add(y, store.row(p));
    }
  }
  return {std::move(large).build(), std::move(train).build(), std::move(test).build()};
}

ActivationStore concat_stores(const ActivationStore& a, const ActivationStore& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.dim() != b.dim()) {
    throw ValidationError("cannot concatenate stores of dim " + std::to_string(a.dim()) +
                          " and " + std::to_string(b.dim()));
  }
  std::vector<CategoryId> labels(a.labels().begin(), a.labels().end());
  labels.insert(labels.end(), b.labels().begin(), b.labels().end());
  std::vector<double> values(a.values().begin(), a.values().end());
  values.insert(values.end(), b.values().begin(), b.values().end());
  return ActivationStore(a.dim(), std::move(labels), std::move(values));
}

ActivationStore filter_store(const ActivationStore& store, std::span<const CategoryId> keep) {
  const std::set<CategoryId> wanted(keep.begin(), keep.end());
  StoreBuilder b(store.dim());
  for (std::size_t p = 0; p < store.size(); ++p) {
    if (wanted.contains(store.category(p))) b.add(store.category(p), store.row(p));
  }
  return std::move(b).build();
}

}  // namespace fewshot
