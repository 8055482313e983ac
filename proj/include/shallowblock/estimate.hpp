#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "shallowblock/join.hpp"
#include "shallowblock/pps_index.hpp"

namespace shallowblock {

inline constexpr std::size_t kHistogramBins = 100;

// Next value of the checkpoint schedule: ceil(1.1 * rank), computed exactly.
inline std::uint64_t next_schedule_rank(std::uint64_t rank) {
  return (11 * rank + 9) / 10;
}

// 1, 2, 3, ..., ending with the first value >= upto.
std::vector<std::uint64_t> rank_schedule(std::uint64_t upto);

struct EstimateOptions {
  int threads = 0;
  bool exclude_self = false;
  // Work clock: runtimes are counted inner-loop steps times a fixed unit
  // cost, which makes trajectories and everything derived from them
  // reproducible. Wall clock measures elapsed time.
  bool work_clock = false;
  // Keep each query's final queue scores; exact_sim_sum and quality_to_rank
  // need them. They hold one value per candidate and dominate memory.
  bool keep_scores = true;
};

// Seconds charged per traversal step or merged token under the work clock.
inline constexpr double kWorkUnitSeconds = 5e-9;

// ---------------------------------------------------------------- recall

struct KnownMatch {
  std::uint32_t query;   // index into the query collection
  std::uint32_t target;  // index into the indexed collection

  friend bool operator==(const KnownMatch&, const KnownMatch&) = default;
};

// Strictest parameters that still return one match.
struct MatchCondition {
  bool reachable = false;
  double max_tau = 0.0;
  double max_tau_r = 0.0;
  std::uint64_t min_k = kUnbounded;
  std::uint64_t min_rank = kUnbounded;
  double score = 0.0;  // the (scaled) similarity
  double best = 0.0;   // the query's best similarity after scaling

  bool admits(const JoinParams& p) const {
    return reachable && p.tau <= score && p.tau_r * best <= score &&
           p.k >= min_k && p.max_rank >= min_rank;
  }
};

struct RecallConditions {
  JoinParams caps;
  std::vector<double> margins;
  std::vector<KnownMatch> matches;
  // [margin index][match index]
  std::vector<std::vector<MatchCondition>> conditions;

  std::size_t margin_index(double d) const;  // throws if d is not a margin
};

// One restricted join per matched query; conditions for every margin d are
// read off the sorted queue as if the match scored (1 - d) * sim.
RecallConditions find_recall_conditions(const TokenSetCollection& queries,
                                        const PpsIndex& index,
                                        std::span<const KnownMatch> matches,
                                        std::span<const double> margins,
                                        const JoinParams& caps,
                                        const EstimateOptions& options = {});

// Fraction of matches admitted by params under margin `margin_index`.
double recall_estimate(const RecallConditions& conds, std::size_t margin_index,
                       const JoinParams& params);

// Sets mask[m] for every admitted match; mask must have one slot per match.
void mark_recalled(const RecallConditions& conds, std::size_t margin_index,
                   const JoinParams& params, std::vector<char>& mask);

// ---------------------------------------------------------------- trajectories

struct Histogram {
  // Cumulative from the lowest bin: count / similarity sum of candidates with
  // a score in bin 0..b.
  std::array<std::uint32_t, kHistogramBins> count{};
  std::array<double, kHistogramBins> sum{};

  std::uint32_t total_count() const { return count.back(); }
  double total_sum() const { return sum.back(); }
  std::uint32_t count_at_or_above(std::size_t bin) const {
    if (bin >= kHistogramBins) return 0;
    return bin == 0 ? count.back() : count.back() - count[bin - 1];
  }
  double sum_at_or_above(std::size_t bin) const {
    if (bin >= kHistogramBins) return 0.0;
    return bin == 0 ? sum.back() : sum.back() - sum[bin - 1];
  }
};

struct Checkpoint {
  std::uint64_t rank = 0;     // every entry up to this rank is reflected
  double runtime = 0.0;       // seconds since the query started
  double best = 0.0;          // S*
  double suffix = 0.0;        // s_a at the current query token
  std::uint32_t histogram = 0;  // index into SearchTrajectory::histograms
};

struct SearchTrajectory {
  std::uint32_t query = 0;
  double query_size = 0.0;  // omega(a)
  double bin_width = 0.01;
  // Recorded with tau_r = 0: S* and the queue only grow, so the runtime
  // stopping condition is monotone along the checkpoints.
  bool monotone = true;
  std::vector<Checkpoint> checkpoints;  // strictly increasing rank; last = end
  std::vector<Histogram> histograms;    // shared by unchanged checkpoints
  std::vector<double> scores;           // final queue, descending; may be dropped
  std::vector<double> cumulative;       // prefix sums of scores

  // Bin holding score s; a score on an edge belongs to the lower bin.
  std::size_t bin_of(double s) const;
  const Histogram& histogram(const Checkpoint& c) const {
    return histograms[c.histogram];
  }
  // Lower bound of the k-th best score at checkpoint c, for k rounded up to
  // the largest integer with the same ceil(log_1.1 k).
  double score_floor(const Checkpoint& c, std::uint64_t k) const;
  std::uint64_t final_rank() const { return checkpoints.back().rank; }
  // Size of the final queue, whether or not its scores were kept.
  std::uint64_t final_count() const {
    return checkpoints.empty() ? 0 : histogram(checkpoints.back()).total_count();
  }
};

using TrajectorySet = std::vector<SearchTrajectory>;

TrajectorySet record_trajectories(const TokenSetCollection& queries,
                                  std::span<const std::uint32_t> sample,
                                  const PpsIndex& index, const JoinParams& caps,
                                  const EstimateOptions& options = {});

// Upper bound on |P| of a join over all queries, scaled from the sample.
double estimate_pair_upper_bound(const JoinParams& params,
                                 const TrajectorySet& trajectories,
                                 double scale);

// Runtime bound in seconds, scaled from the sample and divided by workers.
double estimate_runtime_upper_bound(const JoinParams& params,
                                    const TrajectorySet& trajectories,
                                    double scale, int workers, Measure measure);

// Lower bound on the similarity mass a max_rank-bounded join keeps for the
// trajectory's query.
double sim_sum_lower_bound(double tau, double tau_r, std::uint64_t k,
                           std::uint64_t max_rank,
                           const SearchTrajectory& trajectory);

// Exact-join similarity mass of the trajectory's query.
double exact_sim_sum(double tau, double tau_r, std::uint64_t k,
                     const SearchTrajectory& trajectory);

// Smallest scheduled rank cutoff reaching quality q with probability q_p,
// by bootstrap over the trajectories.
std::uint64_t quality_to_rank(double q, double q_p, double tau, double tau_r,
                              std::uint64_t k, const TrajectorySet& trajectories,
                              std::size_t resamples, std::uint64_t seed);

// Line-oriented debug dumps.
void dump_trajectories(std::ostream& out, const TrajectorySet& trajectories);
void dump_recall_conditions(std::ostream& out, const RecallConditions& conds);

}  // namespace shallowblock
