#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "shallowblock/pps_index.hpp"
#include "shallowblock/similarity.hpp"
#include "shallowblock/tokenset.hpp"

namespace shallowblock {

// Stands for infinity in k and the traversal-rank cutoff.
inline constexpr std::uint64_t kUnbounded =
    std::numeric_limits<std::uint64_t>::max();

struct JoinParams {
  double tau = 0.0;                   // absolute threshold
  double tau_r = 0.0;                 // relative threshold, fraction of the best
  std::uint64_t k = kUnbounded;       // local cardinality
  std::uint64_t max_rank = kUnbounded;  // traversal-rank cutoff (rho*)
  Measure measure = Measure::kJaccard;
};

// Throws ConfigError for out-of-range thresholds.
void validate_params(const JoinParams& params);

struct ScoredPair {
  std::uint32_t query;   // index into the query collection
  std::uint32_t target;  // index into the indexed collection
  double score;

  friend bool operator==(const ScoredPair&, const ScoredPair&) = default;
};

// Grouped by ascending query, each group by descending score then target.
using PairSet = std::vector<ScoredPair>;

struct JoinStats {
  std::uint64_t pre_candidates = 0;  // entries surviving the PPS crop and rho*
  std::uint64_t candidates = 0;      // similarity computations
  std::uint64_t results = 0;
  double query_seconds = 0.0;        // summed per-query wall time
};

struct TraversalEvent {
  std::uint32_t query;
  std::uint64_t rank;
  std::uint32_t set;
};

struct JoinOptions {
  bool positional_filter = true;
  bool pps_crop = true;
  bool exclude_self = false;  // self-join: skip target == query
  int threads = 0;
  JoinStats* stats = nullptr;
  // Every entry the traversal looks at. Forces a single thread.
  std::vector<TraversalEvent>* trace = nullptr;
  // Join only these query indices (output ids stay query indices).
  const std::vector<std::uint32_t>* only = nullptr;
};

// Similarity of a and b given that a.tokens[i] == b.tokens[j] is their first
// common token and s_a, s_b are the suffix weights from there on. Returns 0 as
// soon as the remaining weight cannot reach `tau`; otherwise the exact value.
double partial_sim(const WeightedTokenSet& a, const WeightedTokenSet& b,
                   std::size_t i, std::size_t j, double s_a, double s_b,
                   double tau, Measure measure);

// (tau, tau_r, k)-join of every query against the index, cut off at traversal
// rank params.max_rank. Exact when max_rank is unbounded.
PairSet ttrk_join(const TokenSetCollection& queries, const PpsIndex& index,
                  const JoinParams& params, const JoinOptions& options = {});

// Brute-force reference; ignores params.max_rank.
PairSet naive_join(const TokenSetCollection& queries,
                   const TokenSetCollection& targets, const JoinParams& params,
                   bool exclude_self = false);

// Mean over `num_queries` queries of the preserved share of each query's
// exact similarity mass. Queries without exact pairs count as 1.
double join_quality(const PairSet& exact, const PairSet& approx, double tau_r,
                    std::size_t num_queries);

// Empty when `pairs` satisfies the approximate-join conditions for `params`
// (no duplicates, at most k per query, every score >= tau and >= tau_r times
// the query's best); otherwise a description of the first violation.
std::string check_approximate_join(const PairSet& pairs,
                                   const JoinParams& params);

}  // namespace shallowblock
