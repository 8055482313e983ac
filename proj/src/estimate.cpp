#include "shallowblock/estimate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <random>
#include <string>
#include <unordered_map>

#include "shallowblock/errors.hpp"
#include "threads.hpp"
#include "traversal.hpp"

namespace shallowblock {

namespace {

using detail::better;
using detail::QueueItem;

// Upper end of ceil(log_1.1 k): the largest integer with the same class.
std::uint64_t rounded_k(std::uint64_t k) {
  double p = 1.0;
  while (p < static_cast<double>(k)) p *= 1.1;
  return static_cast<std::uint64_t>(std::floor(p));
}

detail::TraversalLimits limits_for(const JoinParams& caps, bool exclude_self) {
  detail::TraversalLimits limits;
  limits.max_rank = caps.max_rank;
  limits.exclude_self = exclude_self;
  return limits;
}

void check_index(const PpsIndex& index, const TokenSetCollection& queries,
                 const JoinParams& caps) {
  validate_params(caps);
  if (index.measure() != caps.measure) {
    throw ConfigError("index measure does not match caps measure");
  }
  if (queries.norm() != norm_of(caps.measure)) {
    throw ConfigError("query norm does not match measure");
  }
  if (caps.tau < index.tau_build() - kEps) {
    throw ConfigError("caps tau is below the index build threshold");
  }
}

struct RecallState {
  detail::ConditionQueue q;
  double threshold() const { return q.threshold(); }
  void offer(std::uint32_t set, double score, std::uint64_t rank) {
    q.offer({score, set, rank}, [](const QueueItem&) {}, [](const QueueItem&) {});
  }
  void after_entry(std::uint64_t, double, std::uint32_t) {}
  void verified(std::uint64_t) {}
};

struct RecordState {
  detail::ConditionQueue q;
  SearchTrajectory* out = nullptr;
  std::array<std::uint32_t, kHistogramBins> count{};
  std::array<double, kHistogramBins> sum{};
  bool dirty = true;
  std::uint64_t next = 1;
  double best = 0.0;
  bool work_clock = false;
  bool keep_scores = true;
  std::uint64_t work = 0;
  std::chrono::steady_clock::time_point start;

  void reset(SearchTrajectory* trajectory, const JoinParams& caps, bool work) {
    q.reset(caps.tau, caps.tau_r, caps.k);
    out = trajectory;
    count.fill(0);
    sum.fill(0.0);
    dirty = true;
    next = 1;
    best = 0.0;
    work_clock = work;
    this->work = 0;
    start = std::chrono::steady_clock::now();
  }

  double threshold() const { return q.threshold(); }

  void offer(std::uint32_t set, double score, std::uint64_t rank) {
    q.offer(
        {score, set, rank},
        [&](const QueueItem& item) {
          std::size_t b = out->bin_of(item.score);
          ++count[b];
          sum[b] += item.score;
          dirty = true;
        },
        [&](const QueueItem& item) {
          std::size_t b = out->bin_of(item.score);
          if (--count[b] == 0) {
            sum[b] = 0.0;
          } else {
            sum[b] -= item.score;
          }
          dirty = true;
        });
    best = std::max(best, score);
  }

  void verified(std::uint64_t units) { work += units; }

  void after_entry(std::uint64_t rank, double suffix_a, std::uint32_t) {
    ++work;
    if (rank < next) return;
    checkpoint(rank, suffix_a);
    while (next <= rank) next = next_schedule_rank(next);
  }

  double elapsed() const {
    if (work_clock) return static_cast<double>(work) * kWorkUnitSeconds;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
  }

  void snapshot() {
    if (!dirty && !out->histograms.empty()) return;
    Histogram h;
    std::uint32_t c = 0;
    double s = 0.0;
    for (std::size_t b = 0; b < kHistogramBins; ++b) {
      c += count[b];
      s += sum[b];
      h.count[b] = c;
      h.sum[b] = s;
    }
    out->histograms.push_back(h);
    dirty = false;
  }

  void checkpoint(std::uint64_t rank, double suffix_a) {
    snapshot();
    Checkpoint c;
    c.rank = rank;
    c.runtime = elapsed();
    c.best = best;
    c.suffix = suffix_a;
    c.histogram = static_cast<std::uint32_t>(out->histograms.size() - 1);
    out->checkpoints.push_back(c);
  }

  void finish(std::uint64_t rank, double suffix_a) {
    if (!out->checkpoints.empty() && out->checkpoints.back().rank == rank) {
      out->checkpoints.pop_back();
    }
    checkpoint(rank, suffix_a);
    if (!keep_scores) return;
    for (const auto& item : q.queue().sorted()) out->scores.push_back(item.score);
    double running = 0.0;
    for (double s : out->scores) {
      running += s;
      out->cumulative.push_back(running);
    }
  }
};

// Index of the earliest checkpoint with rank >= max_rank, or the last one.
std::size_t checkpoint_at_or_after(const SearchTrajectory& t,
                                   std::uint64_t max_rank) {
  auto it = std::lower_bound(
      t.checkpoints.begin(), t.checkpoints.end(), max_rank,
      [](const Checkpoint& c, std::uint64_t r) { return c.rank < r; });
  if (it == t.checkpoints.end()) return t.checkpoints.size() - 1;
  return static_cast<std::size_t>(it - t.checkpoints.begin());
}

}  // namespace

std::vector<std::uint64_t> rank_schedule(std::uint64_t upto) {
  std::vector<std::uint64_t> out{1};
  while (out.back() < upto) out.push_back(next_schedule_rank(out.back()));
  return out;
}

// ---------------------------------------------------------------- recall

std::size_t RecallConditions::margin_index(double d) const {
  for (std::size_t i = 0; i < margins.size(); ++i) {
    if (std::abs(margins[i] - d) < 1e-12) return i;
  }
  throw ConfigError("margin " + std::to_string(d) + " was not computed");
}

RecallConditions find_recall_conditions(const TokenSetCollection& queries,
                                        const PpsIndex& index,
                                        std::span<const KnownMatch> matches,
                                        std::span<const double> margins,
                                        const JoinParams& caps,
                                        const EstimateOptions& options) {
  check_index(index, queries, caps);
  if (margins.empty()) throw ConfigError("at least one margin is required");
  for (double d : margins) {
    if (!(d >= 0.0 && d < 1.0)) throw ConfigError("margins must lie in [0, 1)");
  }
  const auto& targets = index.collection();
  for (const auto& m : matches) {
    if (m.query >= queries.size() || m.target >= targets.size()) {
      throw DataError("match (" + std::to_string(m.query) + ", " +
                      std::to_string(m.target) + ") references an unknown record");
    }
  }

  RecallConditions conds;
  conds.caps = caps;
  conds.margins.assign(margins.begin(), margins.end());
  conds.matches.assign(matches.begin(), matches.end());
  conds.conditions.assign(margins.size(), std::vector<MatchCondition>(matches.size()));
  const double max_d = *std::max_element(margins.begin(), margins.end());

  std::unordered_map<std::uint32_t, std::vector<std::uint32_t>> by_query;
  std::vector<std::uint32_t> order;
  for (std::uint32_t m = 0; m < matches.size(); ++m) {
    auto [it, inserted] = by_query.try_emplace(matches[m].query);
    if (inserted) order.push_back(matches[m].query);
    it->second.push_back(m);
  }

  const auto limits = limits_for(caps, options.exclude_self);
  const int threads = resolve_threads(options.threads);
#pragma omp parallel num_threads(threads)
  {
    detail::VisitedSet visited(targets.size());
    RecallState state;
#pragma omp for schedule(dynamic, 4)
    for (long long oi = 0; oi < static_cast<long long>(order.size()); ++oi) {
      const std::uint32_t qi = order[oi];
      const auto& a = queries.sets[qi];
      const auto& ids = by_query.at(qi);
      double min_sim = kInf;
      for (std::uint32_t m : ids) {
        if (options.exclude_self && matches[m].target == qi) continue;
        double s = similarity(caps.measure, a, targets.sets[matches[m].target]);
        if (s > 0.0) min_sim = std::min(min_sim, s);
      }
      if (a.empty() || min_sim == kInf) continue;

      state.q.reset(std::max(caps.tau, (1.0 - max_d) * min_sim), caps.tau_r, caps.k);
      detail::traverse_query(a, qi, index, limits, visited, state);
      const std::vector<QueueItem> sorted = state.q.queue().sorted();

      for (std::uint32_t m : ids) {
        const std::uint32_t target = matches[m].target;
        std::size_t p0 = sorted.size();
        for (std::size_t p = 0; p < sorted.size(); ++p) {
          if (sorted[p].set == target) {
            p0 = p;
            break;
          }
        }
        if (p0 == sorted.size()) continue;
        const QueueItem& self = sorted[p0];
        for (std::size_t di = 0; di < margins.size(); ++di) {
          const double scaled = (1.0 - margins[di]) * self.score;
          // Candidates still ahead of the match after scaling.
          std::size_t ahead = 0;
          double best_other = 0.0;
          for (std::size_t p = 0; p < sorted.size(); ++p) {
            if (p == p0) continue;
            if (better(sorted[p].score, sorted[p].set, scaled, target)) ++ahead;
            best_other = std::max(best_other, sorted[p].score);
          }
          MatchCondition& c = conds.conditions[di][m];
          c.reachable = true;
          c.score = scaled;
          c.best = std::max(best_other, scaled);
          c.max_tau = scaled;
          c.max_tau_r = c.best > 0.0 ? scaled / c.best : 0.0;
          c.min_k = ahead + 1;
          const std::uint64_t displaced = sorted[ahead].rank;
          c.min_rank = std::max(self.rank, displaced);
        }
      }
    }
  }
  return conds;
}

double recall_estimate(const RecallConditions& conds, std::size_t margin_index,
                       const JoinParams& params) {
  if (conds.matches.empty()) return 0.0;
  std::size_t hit = 0;
  for (const auto& c : conds.conditions.at(margin_index)) hit += c.admits(params);
  return static_cast<double>(hit) / static_cast<double>(conds.matches.size());
}

void mark_recalled(const RecallConditions& conds, std::size_t margin_index,
                   const JoinParams& params, std::vector<char>& mask) {
  const auto& row = conds.conditions.at(margin_index);
  if (mask.size() != row.size()) throw ConfigError("mask size mismatch");
  for (std::size_t m = 0; m < row.size(); ++m) {
    if (row[m].admits(params)) mask[m] = 1;
  }
}

// ---------------------------------------------------------------- trajectories

std::size_t SearchTrajectory::bin_of(double s) const {
  double b = std::ceil(s / bin_width) - 1.0;
  if (!(b > 0.0)) return 0;
  if (b >= static_cast<double>(kHistogramBins - 1)) return kHistogramBins - 1;
  return static_cast<std::size_t>(b);
}

double SearchTrajectory::score_floor(const Checkpoint& c, std::uint64_t k) const {
  if (k == 0 || k == kUnbounded) return 0.0;
  const Histogram& h = histogram(c);
  const std::uint64_t target = rounded_k(k);
  if (target > h.total_count()) return 0.0;
  // Highest bin j with count_at_or_above(j) >= target; the count falls with j.
  std::size_t lo = 0;
  std::size_t hi = kHistogramBins - 1;
  while (lo < hi) {
    std::size_t mid = (lo + hi + 1) / 2;
    if (h.count_at_or_above(mid) >= target) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  return static_cast<double>(lo) * bin_width;
}

TrajectorySet record_trajectories(const TokenSetCollection& queries,
                                  std::span<const std::uint32_t> sample,
                                  const PpsIndex& index, const JoinParams& caps,
                                  const EstimateOptions& options) {
  check_index(index, queries, caps);
  TrajectorySet out(sample.size());
  const auto limits = limits_for(caps, options.exclude_self);
  for (std::uint32_t qi : sample) {
    if (qi >= queries.size()) throw DataError("sample index out of range");
  }
  const int threads = resolve_threads(options.threads);
#pragma omp parallel num_threads(threads)
  {
    detail::VisitedSet visited(index.collection().size());
    RecordState state;
    state.keep_scores = options.keep_scores;
#pragma omp for schedule(dynamic, 4)
    for (long long si = 0; si < static_cast<long long>(sample.size()); ++si) {
      const std::uint32_t qi = sample[si];
      const auto& a = queries.sets[qi];
      SearchTrajectory& t = out[si];
      t.query = qi;
      t.query_size = a.norm_size;
      t.monotone = caps.tau_r == 0.0;
      double cap = similarity_cap(caps.measure, a.norm_size, index.max_set_size());
      t.bin_width = cap > 0.0 ? cap / static_cast<double>(kHistogramBins) : 0.01;
      state.reset(&t, caps, options.work_clock);
      if (a.empty() || caps.k == 0) {
        state.finish(0, 0.0);
        continue;
      }
      auto totals = detail::traverse_query(a, qi, index, limits, visited, state);
      state.finish(totals.rank, totals.suffix);
    }
  }
  return out;
}

double estimate_pair_upper_bound(const JoinParams& params,
                                 const TrajectorySet& trajectories,
                                 double scale) {
  if (params.k == 0) return 0.0;
  double total = 0.0;
  for (const auto& t : trajectories) {
    if (t.checkpoints.empty()) continue;
    const std::size_t hi = checkpoint_at_or_after(t, params.max_rank);
    const Checkpoint& c = t.checkpoints[hi];
    // S* at or before the cutoff, so tau_tilde never exceeds the join's.
    double best = 0.0;
    if (c.rank <= params.max_rank) {
      best = c.best;
    } else if (hi > 0) {
      best = t.checkpoints[hi - 1].best;
    }
    const double tau = std::max(params.tau, params.tau_r * best);
    if (tau > c.best) continue;
    const std::uint64_t n = t.histogram(c).count_at_or_above(t.bin_of(tau));
    total += static_cast<double>(std::min<std::uint64_t>(params.k, n));
  }
  return total * scale;
}

double estimate_runtime_upper_bound(const JoinParams& params,
                                    const TrajectorySet& trajectories,
                                    double scale, int workers, Measure measure) {
  double total = 0.0;
  for (const auto& t : trajectories) {
    if (t.checkpoints.empty()) continue;
    auto stops = [&](const Checkpoint& c) {
      if (c.rank >= params.max_rank) return true;
      const double tau = std::max(params.tau, params.tau_r * c.best);
      const double sigma = detail::sigma_fast(measure, t.query_size, tau) - kEps;
      if (c.suffix < sigma) return true;
      if (params.k == kUnbounded) return false;
      const double floor = t.score_floor(c, params.k);
      return floor > tau && c.suffix < detail::sigma_fast(measure, t.query_size, floor) - kEps;
    };
    std::size_t chosen = t.checkpoints.size() - 1;
    if (t.monotone) {
      std::size_t lo = 0;
      std::size_t hi = chosen;
      while (lo < hi) {
        std::size_t mid = lo + (hi - lo) / 2;
        if (stops(t.checkpoints[mid])) {
          hi = mid;
        } else {
          lo = mid + 1;
        }
      }
      chosen = lo;
    } else {
      for (std::size_t i = 0; i < t.checkpoints.size(); ++i) {
        if (stops(t.checkpoints[i])) {
          chosen = i;
          break;
        }
      }
    }
    total += t.checkpoints[chosen].runtime;
  }
  return total * scale / static_cast<double>(std::max(1, workers));
}

double exact_sim_sum(double tau, double tau_r, std::uint64_t k,
                     const SearchTrajectory& t) {
  if (t.scores.size() != t.final_count()) {
    throw ConfigError("trajectory was recorded without scores");
  }
  if (k == 0 || t.scores.empty()) return 0.0;
  const double cut = std::max(tau, tau_r * t.scores.front());
  auto it = std::partition_point(t.scores.begin(), t.scores.end(),
                                 [&](double s) { return s >= cut; });
  const std::uint64_t n = static_cast<std::uint64_t>(it - t.scores.begin());
  const std::uint64_t m = std::min(n, k);
  return m == 0 ? 0.0 : t.cumulative[m - 1];
}

double sim_sum_lower_bound(double tau, double tau_r, std::uint64_t k,
                           std::uint64_t max_rank, const SearchTrajectory& t) {
  if (k == 0 || t.checkpoints.empty()) return 0.0;
  const Checkpoint& last = t.checkpoints.back();
  if (max_rank >= last.rank) return exact_sim_sum(tau, tau_r, k, t);
  // Latest checkpoint reflecting no entry beyond the cutoff.
  auto it = std::upper_bound(
      t.checkpoints.begin(), t.checkpoints.end(), max_rank,
      [](std::uint64_t r, const Checkpoint& c) { return r < c.rank; });
  if (it == t.checkpoints.begin()) return 0.0;
  const Checkpoint& c = *(it - 1);
  const double tau_tilde = std::max(tau, tau_r * last.best);
  if (tau_tilde > c.best) return 0.0;
  const Histogram& h = t.histogram(c);

  const double first = std::ceil(tau_tilde / t.bin_width);
  if (first >= static_cast<double>(kHistogramBins)) return 0.0;
  const std::size_t i = first > 0.0 ? static_cast<std::size_t>(first) : 0;
  const std::uint64_t n = h.count_at_or_above(i);
  if (n <= k) return h.sum_at_or_above(i);

  std::size_t j = kHistogramBins - 1;
  while (h.count_at_or_above(j) < k) --j;
  const double w = t.bin_width;
  const double excess = static_cast<double>(h.count_at_or_above(j) - k);
  const double by_upper = h.sum_at_or_above(j) - static_cast<double>(j + 1) * w * excess;
  const double inside = static_cast<double>(k - h.count_at_or_above(j + 1));
  const double by_lower = h.sum_at_or_above(j + 1) + inside * static_cast<double>(j) * w;
  return std::max({by_upper, by_lower, 0.0});
}

std::uint64_t quality_to_rank(double q, double q_p, double tau, double tau_r,
                              std::uint64_t k, const TrajectorySet& trajectories,
                              std::size_t resamples, std::uint64_t seed) {
  if (!(q > 0.0 && q <= 1.0)) throw ConfigError("quality must lie in (0, 1]");
  if (!(q_p > 0.0 && q_p < 1.0)) throw ConfigError("q_p must lie in (0, 1)");
  if (resamples == 0) throw ConfigError("at least one bootstrap resample is required");
  const std::size_t n = trajectories.size();
  if (n == 0) return 0;

  std::vector<double> denominators(n);
  std::uint64_t max_final = 1;
  bool any = false;
  for (std::size_t i = 0; i < n; ++i) {
    denominators[i] = exact_sim_sum(tau, tau_r, k, trajectories[i]);
    any = any || denominators[i] > 0.0;
    if (!trajectories[i].checkpoints.empty()) {
      max_final = std::max(max_final, trajectories[i].final_rank());
    }
  }
  if (!any) return 0;

  const std::vector<std::uint64_t> schedule = rank_schedule(max_final);
  const std::size_t steps = schedule.size();
  // ratio[i * steps + s]: preserved share of query i at schedule[s].
  std::vector<double> ratio(n * steps, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (denominators[i] <= 0.0) continue;
    for (std::size_t s = 0; s < steps; ++s) {
      double lb = sim_sum_lower_bound(tau, tau_r, k, schedule[s], trajectories[i]);
      ratio[i * steps + s] = std::min(1.0, lb / denominators[i]);
    }
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::uint32_t> multiplicity(n);
  std::vector<std::uint64_t> found;
  found.reserve(resamples);
  for (std::size_t r = 0; r < resamples; ++r) {
    std::fill(multiplicity.begin(), multiplicity.end(), 0);
    for (std::size_t i = 0; i < n; ++i) ++multiplicity[pick(rng)];
    auto mean_at = [&](std::size_t s) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (multiplicity[i]) total += multiplicity[i] * ratio[i * steps + s];
      }
      return total / static_cast<double>(n);
    };
    std::size_t lo = 0;
    std::size_t hi = steps - 1;
    while (lo < hi) {
      std::size_t mid = lo + (hi - lo) / 2;
      if (mean_at(mid) >= q) {
        hi = mid;
      } else {
        lo = mid + 1;
      }
    }
    found.push_back(schedule[lo]);
  }
  std::sort(found.begin(), found.end());
  double position = std::ceil(q_p * static_cast<double>(resamples) - 1e-9);
  std::size_t idx = position < 1.0 ? 0 : static_cast<std::size_t>(position) - 1;
  return found[std::min(idx, found.size() - 1)];
}

void dump_trajectories(std::ostream& out, const TrajectorySet& trajectories) {
  for (const auto& t : trajectories) {
    out << "trajectory query=" << t.query << " size=" << t.query_size
        << " bin_width=" << t.bin_width << " pairs=" << t.scores.size() << '\n';
    for (const auto& c : t.checkpoints) {
      const Histogram& h = t.histogram(c);
      out << "  checkpoint rank=" << c.rank << " runtime=" << c.runtime
          << " best=" << c.best << " suffix=" << c.suffix
          << " count=" << h.total_count() << " sum=" << h.total_sum() << '\n';
    }
  }
}

void dump_recall_conditions(std::ostream& out, const RecallConditions& conds) {
  for (std::size_t di = 0; di < conds.margins.size(); ++di) {
    for (std::size_t m = 0; m < conds.matches.size(); ++m) {
      const auto& c = conds.conditions[di][m];
      out << "condition d=" << conds.margins[di] << " query=" << conds.matches[m].query
          << " target=" << conds.matches[m].target;
      if (!c.reachable) {
        out << " unreachable\n";
        continue;
      }
      out << " max_tau=" << c.max_tau << " max_tau_r=" << c.max_tau_r
          << " min_k=" << c.min_k << " min_rank=" << c.min_rank << '\n';
    }
  }
}

}  // namespace shallowblock
