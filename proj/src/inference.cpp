#include "fewshot/inference.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <set>

namespace fewshot {

namespace {

void check_query_dim(std::size_t expected, std::size_t got) {
  if (expected != got) {
    throw ValidationError("dimension mismatch: expected " + std::to_string(expected) + ", got " +
                          std::to_string(got));
  }
}

Matrix rows_of(const ActivationStore& store, std::span<const std::size_t> positions) {
  Matrix m(0, store.dim());
  for (std::size_t p : positions) m.append_row(store.row(p));
  return m;
}

}  // namespace

const ClassifierEntry& Classifier::entry(CategoryId y) const {
  auto it = index_.find(y);
  if (it == index_.end()) throw ValidationError("classifier has no category " + std::to_string(y));
  return entries_[it->second];
}

void Classifier::add_entry(CategoryId y, EntryKind kind, std::size_t n_rows) {
  if (index_.contains(y)) {
    throw ValidationError("category " + std::to_string(y) + " is already registered");
  }
  index_.emplace(y, entries_.size());
  entries_.push_back({y, kind, weights_.rows() - n_rows, n_rows});
}

void Classifier::add_single(CategoryId y, std::span<const double> w) {
  check_query_dim(dim(), w.size());
  if (index_.contains(y)) {
    throw ValidationError("category " + std::to_string(y) + " is already registered");
  }
  weights_.append_row(w);
  add_entry(y, EntryKind::Single, 1);
}

void Classifier::add_max_over(CategoryId y, const Matrix& ws) {
  if (ws.rows() == 0) throw ValidationError("max-over entry needs at least one weight");
  check_query_dim(dim(), ws.cols());
  if (index_.contains(y)) {
    throw ValidationError("category " + std::to_string(y) + " is already registered");
  }
  for (std::size_t r = 0; r < ws.rows(); ++r) weights_.append_row(ws.row(r));
  add_entry(y, EntryKind::MaxOver, ws.rows());
}

void Classifier::register_large(const PhiModel& phi, CategoryId y, std::span<const double> mean) {
  check_query_dim(dim(), phi.dim());
  add_single(y, forward(phi, mean));
}

void Classifier::register_few_shot(const PhiModel& phi, CategoryId y, const Matrix& shots) {
  check_query_dim(dim(), phi.dim());
  Matrix ws(0, dim());
  for (std::size_t r = 0; r < shots.rows(); ++r) ws.append_row(forward(phi, shots.row(r)));
  add_max_over(y, ws);
}

std::vector<std::size_t> Classifier::group_offsets() const {
  std::vector<std::size_t> off;
  off.reserve(entries_.size() + 1);
  for (const auto& e : entries_) off.push_back(e.first_row);
  off.push_back(weights_.rows());
  return off;
}

Classifier build_classifier(const PhiModel& phi, const CategoryMeans& means_large,
                            const ActivationStore& few_train) {
  if (means_large.dim != phi.dim() || (!few_train.empty() && few_train.dim() != phi.dim())) {
    throw ValidationError("build_classifier: dimension mismatch between predictor (" +
                          std::to_string(phi.dim()) + ") and data");
  }
  Classifier c(phi.dim());
  for (const auto& [y, mean] : means_large.means) c.register_large(phi, y, mean);
  if (!few_train.empty()) {
    for (CategoryId y : few_train.categories()) {
      c.register_few_shot(phi, y, rows_of(few_train, few_train.positions(y)));
    }
  }
  return c;
}

ScoreMap classify(const Classifier& classifier, std::span<const double> a) {
  check_query_dim(classifier.dim(), a.size());
  ScoreMap out;
  for (const auto& e : classifier.entries()) {
    double best = dot(classifier.weight(e.first_row), a);
    for (std::size_t r = 1; r < e.n_rows; ++r) {
      best = std::max(best, dot(classifier.weight(e.first_row + r), a));
    }
    out.emplace(e.id, best);
  }
  return out;
}

Matrix classify_batch(const Classifier& classifier, const Matrix& queries,
                      kernels::ExecPolicy policy) {
  check_query_dim(classifier.dim(), queries.cols());
  const Matrix raw = kernels::score_rows(queries, classifier.weights(), policy);
  const auto offsets = classifier.group_offsets();
  return kernels::group_max(raw, offsets, policy);
}

ScoreMap softmax_probs(const ScoreMap& scores) {
  if (scores.empty()) throw ValidationError("softmax of an empty score set");
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& [_, s] : scores) m = std::max(m, s);
  double z = 0.0;
  ScoreMap out;
  for (const auto& [y, s] : scores) {
    const double e = std::exp(s - m);
    out.emplace(y, e);
    z += e;
  }
  for (auto& [_, p] : out) p /= z;
  return out;
}

std::size_t rank_of(std::span<const double> scores, std::span<const CategoryId> ids,
                    std::size_t target) {
  const double st = scores[target];
  const CategoryId yt = ids[target];
  std::size_t rank = 0;
  for (std::size_t c = 0; c < scores.size(); ++c) {
    if (scores[c] > st || (scores[c] == st && ids[c] < yt)) ++rank;
  }
  return rank;
}

namespace {

// Shared tail of top-k evaluation: `scores` has one column per candidate.
TopKResult count_top_k(const Matrix& scores, std::span<const CategoryId> candidate_ids,
                       std::span<const std::size_t> true_column, std::size_t k) {
  TopKResult res{k, 0, scores.rows()};
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    if (rank_of(scores.row(i), candidate_ids, true_column[i]) < k) ++res.correct;
  }
  return res;
}

}  // namespace

TopKResult top_k_accuracy(const Classifier& classifier, const ActivationStore& test, std::size_t k,
                          const std::optional<std::vector<CategoryId>>& restrict,
                          kernels::ExecPolicy policy) {
  if (k < 1) throw ValidationError("top-k: k must be >= 1");
  if (test.empty()) throw ValidationError("top-k: empty test set");
  check_query_dim(classifier.dim(), test.dim());

  std::vector<std::size_t> cand_entries;
  if (restrict) {
    std::set<CategoryId> wanted(restrict->begin(), restrict->end());
    for (std::size_t e = 0; e < classifier.size(); ++e) {
      if (wanted.contains(classifier.entries()[e].id)) cand_entries.push_back(e);
    }
    if (cand_entries.size() != wanted.size()) {
      throw ValidationError("top-k: restrict set names categories missing from the classifier");
    }
  } else {
    cand_entries.resize(classifier.size());
    std::iota(cand_entries.begin(), cand_entries.end(), std::size_t{0});
  }
  if (k > cand_entries.size()) {
    throw ValidationError("top-k: k = " + std::to_string(k) + " exceeds " +
                          std::to_string(cand_entries.size()) + " candidate categories");
  }
  std::map<CategoryId, std::size_t> column_of;
  std::vector<CategoryId> ids;
  for (std::size_t c = 0; c < cand_entries.size(); ++c) {
    const CategoryId y = classifier.entries()[cand_entries[c]].id;
    column_of.emplace(y, c);
    ids.push_back(y);
  }

  Matrix queries(0, test.dim());
  std::vector<std::size_t> true_column;
  for (std::size_t p = 0; p < test.size(); ++p) {
    auto it = column_of.find(test.category(p));
    if (it == column_of.end()) {
      if (restrict) continue;
      throw ValidationError("top-k: test category " + std::to_string(test.category(p)) +
                            " is not in the classifier");
    }
    queries.append_row(test.row(p));
    true_column.push_back(it->second);
  }
  if (queries.rows() == 0) return {k, 0, 0};

  const Matrix all = classify_batch(classifier, queries, policy);
  Matrix scores(all.rows(), cand_entries.size());
  for (std::size_t i = 0; i < all.rows(); ++i) {
    for (std::size_t c = 0; c < cand_entries.size(); ++c) scores(i, c) = all(i, cand_entries[c]);
  }
  return count_top_k(scores, ids, true_column, k);
}

TopKResult nn_cosine_baseline(const ActivationStore& ref, const ActivationStore& test,
                              std::size_t k, kernels::ExecPolicy policy) {
  if (k < 1) throw ValidationError("nn-cosine: k must be >= 1");
  if (ref.empty() || test.empty()) throw ValidationError("nn-cosine: empty reference or test set");
  check_query_dim(ref.dim(), test.dim());
  const std::vector<CategoryId> ids = ref.categories();
  if (k > ids.size()) {
    throw ValidationError("nn-cosine: k = " + std::to_string(k) + " exceeds " +
                          std::to_string(ids.size()) + " reference categories");
  }
  Matrix refs(0, ref.dim());
  std::vector<std::size_t> offsets{0};
  std::map<CategoryId, std::size_t> column_of;
  for (std::size_t c = 0; c < ids.size(); ++c) {
    for (std::size_t p : ref.positions(ids[c])) refs.append_row(ref.row(p));
    offsets.push_back(refs.rows());
    column_of.emplace(ids[c], c);
  }
  Matrix queries(0, test.dim());
  std::vector<std::size_t> true_column;
  for (std::size_t p = 0; p < test.size(); ++p) {
    auto it = column_of.find(test.category(p));
    if (it == column_of.end()) {
      throw ValidationError("nn-cosine: test category " + std::to_string(test.category(p)) +
                            " has no references");
    }
    queries.append_row(test.row(p));
    true_column.push_back(it->second);
  }
  const Matrix sims = kernels::score_rows(kernels::normalize_rows(queries, policy),
                                          kernels::normalize_rows(refs, policy), policy);
  return count_top_k(kernels::group_max(sims, offsets, policy), ids, true_column, k);
}

Episode sample_episode(const ActivationStore& store, std::size_t n_way, std::size_t k_shot,
                       Rng& rng) {
  std::vector<CategoryId> pool = store.categories();
  Episode ep;
  for (std::size_t i = 0; i < n_way; ++i) {
    const std::size_t j = i + rng.uniform_index(pool.size() - i);
    std::swap(pool[i], pool[j]);
    ep.categories.push_back(pool[i]);
  }
  for (CategoryId y : ep.categories) {
    std::vector<std::size_t> pos = store.positions(y);
    for (std::size_t i = 0; i < k_shot; ++i) {
      const std::size_t j = i + rng.uniform_index(pos.size() - i);
      std::swap(pos[i], pos[j]);
    }
    ep.refs.emplace_back(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(k_shot));
    ep.queries.insert(ep.queries.end(), pos.begin() + static_cast<std::ptrdiff_t>(k_shot), pos.end());
  }
  std::sort(ep.queries.begin(), ep.queries.end());
  return ep;
}

double ci95_halfwidth(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  return 1.96 * sd / std::sqrt(static_cast<double>(n));
}

namespace {

double episode_accuracy(const ActivationStore& store, const PhiModel& phi, std::size_t n_way,
                        std::size_t k_shot, std::uint64_t seed) {
  Rng rng(seed);
  const Episode ep = sample_episode(store, n_way, k_shot, rng);
  Classifier c(store.dim());
  for (std::size_t i = 0; i < ep.categories.size(); ++i) {
    c.register_few_shot(phi, ep.categories[i], rows_of(store, ep.refs[i]));
  }
  const Matrix scores = classify_batch(c, rows_of(store, ep.queries));
  std::vector<CategoryId> ids;
  std::map<CategoryId, std::size_t> column_of;
  for (const auto& e : c.entries()) {
    column_of.emplace(e.id, ids.size());
    ids.push_back(e.id);
  }
  std::vector<std::size_t> true_column;
  for (std::size_t p : ep.queries) true_column.push_back(column_of.at(store.category(p)));
  return count_top_k(scores, ids, true_column, 1).accuracy();
}

}  // namespace

EpisodeReport run_episodes(const ActivationStore& few_store, const PhiModel& phi,
                           std::size_t n_way, std::size_t k_shot, std::size_t n_episodes,
                           std::uint64_t seed, kernels::ExecPolicy policy) {
  if (n_way < 1 || k_shot < 1 || n_episodes < 1) {
    throw ValidationError("episodes: n_way, k_shot and n_episodes must be >= 1");
  }
  check_query_dim(phi.dim(), few_store.dim());
  if (few_store.category_count() < n_way) {
    throw ValidationError("episodes: store has " + std::to_string(few_store.category_count()) +
                          " categories, need " + std::to_string(n_way));
  }
  for (CategoryId y : few_store.categories()) {
    if (few_store.positions(y).size() <= k_shot) {
      throw ValidationError("episodes: category " + std::to_string(y) + " has " +
                            std::to_string(few_store.positions(y).size()) +
                            " samples, need more than " + std::to_string(k_shot));
    }
  }

  EpisodeReport rep{n_way, k_shot, n_episodes, 0.0, 0.0, std::vector<double>(n_episodes)};
  if (policy.parallel()) {
    std::vector<std::exception_ptr> errors(n_episodes);
    const auto n = static_cast<std::ptrdiff_t>(n_episodes);
#pragma omp parallel for num_threads(policy.threads) schedule(dynamic)
    for (std::ptrdiff_t e = 0; e < n; ++e) {
      const auto i = static_cast<std::size_t>(e);
      try {
        rep.accuracies[i] = episode_accuracy(few_store, phi, n_way, k_shot, seed + i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
    for (auto& err : errors) {
      if (err) std::rethrow_exception(err);
    }
  } else {
    for (std::size_t e = 0; e < n_episodes; ++e) {
      rep.accuracies[e] = episode_accuracy(few_store, phi, n_way, k_shot, seed + e);
    }
  }
  rep.mean = std::accumulate(rep.accuracies.begin(), rep.accuracies.end(), 0.0) /
             static_cast<double>(n_episodes);
  rep.ci95 = ci95_halfwidth(rep.accuracies);
  return rep;
}

}  // namespace fewshot
