#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fewshot/data.hpp"
#include "fewshot/kernels.hpp"
#include "fewshot/predictor.hpp"

namespace fewshot {

enum class EntryKind { Single, MaxOver };

struct ClassifierEntry {
  CategoryId id = 0;
  EntryKind kind = EntryKind::Single;
  std::size_t first_row = 0;  // into Classifier::weights()
  std::size_t n_rows = 0;
};

// Softmax classifier whose weights are predicted per category. Large
// categories hold one weight predicted from their mean activation; few-shot
// categories keep one weight per reference sample and score by max response.
// Registering a category only appends; existing entries are never touched.
class Classifier {
 public:
  explicit Classifier(std::size_t dim) : weights_(0, dim) {}

  std::size_t dim() const { return weights_.cols(); }
  std::size_t size() const { return entries_.size(); }
  std::span<const ClassifierEntry> entries() const { return entries_; }
  const ClassifierEntry& entry(CategoryId y) const;
  bool contains(CategoryId y) const { return index_.contains(y); }
  const Matrix& weights() const { return weights_; }
  std::span<const double> weight(std::size_t row) const { return weights_.row(row); }

  void add_single(CategoryId y, std::span<const double> w);
  void add_max_over(CategoryId y, const Matrix& ws);

  // One forward pass.
  void register_large(const PhiModel& phi, CategoryId y, std::span<const double> mean);
  // One forward pass per row of `shots`.
  void register_few_shot(const PhiModel& phi, CategoryId y, const Matrix& shots);

  // Row offsets delimiting each entry's weights, length size()+1.
  std::vector<std::size_t> group_offsets() const;

 private:
  void add_entry(CategoryId y, EntryKind kind, std::size_t n_rows);

  Matrix weights_;
  std::vector<ClassifierEntry> entries_;
  std::map<CategoryId, std::size_t> index_;
};

using ScoreMap = std::map<CategoryId, double>;

Classifier build_classifier(const PhiModel& phi, const CategoryMeans& means_large,
                            const ActivationStore& few_train);

ScoreMap classify(const Classifier& classifier, std::span<const double> a);

// Scores for every row of `queries`, columns in entry order.
Matrix classify_batch(const Classifier& classifier, const Matrix& queries,
                      kernels::ExecPolicy policy = {});

ScoreMap softmax_probs(const ScoreMap& scores);

struct TopKResult {
  std::size_t k = 0;
  std::size_t correct = 0;
  std::size_t count = 0;

  double accuracy() const {
    return count == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(count);
  }
};

// Rank of `target` among `scores` ordered by (score desc, id asc); 0 is best.
std::size_t rank_of(std::span<const double> scores, std::span<const CategoryId> ids,
                    std::size_t target);

// When `restrict` is given it limits both candidate categories and test samples.
TopKResult top_k_accuracy(const Classifier& classifier, const ActivationStore& test, std::size_t k,
                          const std::optional<std::vector<CategoryId>>& restrict = std::nullopt,
                          kernels::ExecPolicy policy = {});

// Nearest reference by cosine similarity; category score is the best
// similarity among its references.
TopKResult nn_cosine_baseline(const ActivationStore& ref, const ActivationStore& test,
                              std::size_t k, kernels::ExecPolicy policy = {});

struct SplitAccuracy {
  std::string method;  // "predictor" or "nn_cosine"
  std::string split;   // "large", "few", ...
  TopKResult top1;
  std::optional<TopKResult> top5;  // absent with fewer than 5 candidates
};

struct EvalReport {
  std::vector<SplitAccuracy> rows;
};

struct Episode {
  std::vector<CategoryId> categories;            // sampled order
  std::vector<std::vector<std::size_t>> refs;    // per category, store positions
  std::vector<std::size_t> queries;              // ascending store positions
};

// Uniform n_way categories without replacement, then k_shot references each;
// everything else from those categories becomes a query.
Episode sample_episode(const ActivationStore& store, std::size_t n_way, std::size_t k_shot,
                       Rng& rng);

struct EpisodeReport {
  std::size_t n_way = 0;
  std::size_t k_shot = 0;
  std::size_t n_episodes = 0;
  double mean = 0.0;
  double ci95 = 0.0;
  std::vector<double> accuracies;
};

// 1.96 * sample std / sqrt(n); 0 for fewer than two values.
double ci95_halfwidth(std::span<const double> values);

// Episode e draws from Rng(seed + e), so serial and parallel runs agree.
EpisodeReport run_episodes(const ActivationStore& few_store, const PhiModel& phi,
                           std::size_t n_way, std::size_t k_shot, std::size_t n_episodes,
                           std::uint64_t seed, kernels::ExecPolicy policy = {});

void write_eval_text(std::ostream& out, const EvalReport& report);
void write_eval_records(std::ostream& out, const EvalReport& report);
void write_episode_text(std::ostream& out, const EpisodeReport& report);
void write_episode_records(std::ostream& out, const EpisodeReport& report);
// "mean ± ci95" with four decimals.
std::string episode_summary(const EpisodeReport& report);

}  // namespace fewshot
