#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "shallowblock/estimate.hpp"
#include "shallowblock/join.hpp"
#include "shallowblock/tokenset.hpp"

namespace shallowblock {

struct BlockerBudget {
  std::uint64_t k = 10;  // |P| <= k * min(|A|, |B|)
  double q = 1.0;        // approximation quality of the joins
  double q_p = 0.95;
};

// Token set model, measure and join parameters of one directional join.
struct JoinConfig {
  TokenSetModelConfig model;
  JoinParams params;  // params.k == 0: the direction is skipped

  std::string name() const;  // e.g. "tfidf-word/jaccard"
};

struct BlockerOptions {
  std::uint64_t seed = 0;
  int threads = 0;
  std::size_t sample_size = 0;  // 0: 1000 unsupervised, 500 supervised
  std::size_t dp_k = 10;
  std::uint64_t max_trigram_chars = 100'000'000;
  std::size_t bootstrap_resamples = 200;
  bool work_clock = true;  // deterministic runtime estimates
  // Supervised only.
  int restarts = 32;
  int random_draws = 10;
  int folds = 3;
  std::vector<double> margins{0.0, 0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5};
};

// ---------------------------------------------------------------- reports

struct DirectionReport {
  std::string direction;  // "ab", "ba" or "aa"
  bool skipped = false;
  JoinConfig config;
  double estimated_pairs = 0.0;
  double estimated_runtime = 0.0;
  double estimated_recall = -1.0;  // -1 when no matches were given
  std::uint64_t pairs = 0;
  double seconds = 0.0;
  std::vector<std::pair<std::string, double>> discriminatory_power;
};

struct RunReport {
  std::string mode;
  std::uint64_t seed = 0;
  std::uint64_t k = 0;
  double q = 1.0;
  double margin = 0.0;
  std::string objective;
  double estimated_recall = -1.0;
  std::vector<DirectionReport> directions;
  std::vector<std::string> warnings;
  std::uint64_t pairs = 0;
  double seconds = 0.0;

  std::string to_json(int indent = 2) const;  // indent < 0: one line
};

// Pairs index into (A, B); for deduplication both sides are A and query < target.
struct BlockResult {
  PairSet pairs;
  RunReport report;
};

// ---------------------------------------------------------------- unsupervised

// Ratio-based sharpness of each query's top-k_dp similarities. Queries without
// any pair contribute an inner term of 1; missing slots count as ratio 0.
double discriminatory_power(const PairSet& pairs, std::size_t num_queries,
                            std::size_t k_dp);

// Directional budget split after ordering the sides so that |A| <= |B|.
struct BudgetSplit {
  std::uint64_t k_ab = 0;
  std::uint64_t k_ba = 0;
};
BudgetSplit split_budget(std::uint64_t k, std::size_t size_a, std::size_t size_b);

// Step used by the threshold searches: 1e-4, relative to `upper` for Overlap.
double threshold_resolution(Measure measure, double upper);

// Largest grid threshold (tau alone, or tau_r alone when `relative`) whose
// estimated pair count stays >= budget; 0 when none does.
double balance_threshold(const TrajectorySet& trajectories, Measure measure,
                         double budget, double scale, bool relative);

// Strings converted under every tokenizer, sharing vocabularies between the
// two sides of a join.
class Corpus {
 public:
  Corpus(std::span<const std::string> a, std::span<const std::string> b,
         bool self_join, std::uint64_t max_trigram_chars);

  bool self_join() const { return self_; }
  std::span<const std::string> side(int s) const { return s == 0 ? a_ : b_; }
  const std::vector<Tokenizer>& tokenizers() const { return tokenizers_; }
  const Vocabulary& vocabulary(Tokenizer t) const { return vocabularies_.at(t); }
  std::shared_ptr<const TokenSetCollection> encode(int s,
                                                   const TokenSetModelConfig& model) const;

 private:
  std::vector<std::string> a_;
  std::vector<std::string> b_;
  bool self_;
  std::vector<Tokenizer> tokenizers_;
  std::map<Tokenizer, Vocabulary> vocabularies_;
};

struct BalancedJoinResult {
  PairSet pairs;
  DirectionReport report;
  TrajectorySet trajectories;  // of the chosen configuration
  double scale = 1.0;
  double budget = 0.0;
};

// One direction of unsupervised blocking: side `query_side` of the corpus
// queries the other side with at most budget.k pairs per query.
BalancedJoinResult balanced_ttrk_join(const Corpus& corpus, int query_side,
                                      const BlockerBudget& budget,
                                      const BlockerOptions& options = {});

BlockResult block_unsupervised(std::span<const std::string> a,
                               std::span<const std::string> b,
                               const BlockerBudget& budget,
                               const BlockerOptions& options = {});

BlockResult block_dedup_unsupervised(std::span<const std::string> a,
                                     const BlockerBudget& budget,
                                     const BlockerOptions& options = {});

// ---------------------------------------------------------------- supervised

struct Outcome {
  double recall = 0.0;
  double pairs = 0.0;
  double runtime = 0.0;  // seconds
  double k_tilde = 0.0;
};

// Compared lexicographically; larger is better.
using ObjectiveKey = std::array<double, 2>;

struct Objective {
  std::string name;
  std::function<ObjectiveKey(const Outcome&)> key;
  double recall_target = -1.0;  // reported when the optimum misses it
};

// (recall >= R, then lowest k~ + c_rt * runtime; otherwise highest recall).
Objective recall_target_objective(double target, double c_rt = 0.01);
// recall - c_k * k~ - c_rt * runtime.
Objective linear_objective(double c_k, double c_rt = 0.01);

// Recorded evidence for one (token set model, measure) configuration.
struct ConfigEvidence {
  TokenSetModelConfig model;
  Measure measure = Measure::kJaccard;
  TrajectorySet trajectories;
  RecallConditions conditions;
  double scale = 1.0;            // |queries| / |sample|
  double tau_cap = 1.0;          // largest threshold worth trying
  std::uint64_t max_k = 1;       // largest queue seen in the sample
  std::uint64_t max_rank = 1;    // largest final traversal rank in the sample
};

struct DirectionEvidence {
  std::string direction;
  std::vector<ConfigEvidence> configs;
  // For every global match, the condition slots that recall it.
  std::vector<std::vector<std::uint32_t>> slots;
};

struct DirectionChoice {
  std::size_t config = 0;
  JoinParams params;
};

struct Solution {
  std::vector<DirectionChoice> directions;  // parallel to the evidence
};

struct OptimizerOptions {
  int restarts = 32;
  int random_draws = 10;
  std::uint64_t seed = 0;
  int threads = 0;
  int workers = 1;  // divides runtime estimates
  double min_side = 1.0;
};

struct OptimizedSolution {
  Solution solution;
  Outcome outcome;
  ObjectiveKey key{};
  std::uint64_t evaluations = 0;
};

// Estimated recall over `subset` (global match ids), pairs and runtime.
Outcome evaluate_solution(const Solution& s,
                          std::span<const DirectionEvidence> evidence,
                          std::size_t margin_index,
                          std::span<const std::uint32_t> subset,
                          const OptimizerOptions& options);

// Random restarts with hill climbing over both directions at once.
OptimizedSolution optimize_join_configs(const Objective& f,
                                        std::span<const DirectionEvidence> evidence,
                                        std::size_t margin_index,
                                        std::span<const std::uint32_t> subset,
                                        const OptimizerOptions& options);

BlockResult block_supervised(std::span<const std::string> a,
                             std::span<const std::string> b,
                             std::span<const KnownMatch> matches,
                             const Objective& f,
                             const BlockerOptions& options = {});

BlockResult block_dedup_supervised(std::span<const std::string> a,
                                   std::span<const KnownMatch> matches,
                                   const Objective& f,
                                   const BlockerOptions& options = {});

}  // namespace shallowblock
