#include "shallowblock/join.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <set>
#include <sstream>
#include <utility>

#include "shallowblock/errors.hpp"
#include "threads.hpp"
#include "traversal.hpp"

namespace shallowblock {

namespace {

using detail::better;

bool pair_order(const ScoredPair& x, const ScoredPair& y) {
  if (x.query != y.query) return x.query < y.query;
  return better(x.score, x.target, y.score, y.target);
}

struct JoinState {
  detail::ConditionQueue q;
  std::vector<TraversalEvent>* trace = nullptr;
  std::uint32_t query = 0;

  double threshold() const { return q.threshold(); }
  void offer(std::uint32_t set, double score, std::uint64_t rank) {
    q.offer({score, set, rank}, [](const detail::QueueItem&) {},
            [](const detail::QueueItem&) {});
  }
  void after_entry(std::uint64_t rank, double, std::uint32_t set) {
    if (trace) trace->push_back({query, rank, set});
  }
  void verified(std::uint64_t) {}
};

}  // namespace

void validate_params(const JoinParams& params) {
  validate_threshold(params.measure, params.tau);
  if (!(params.tau_r >= 0.0 && params.tau_r <= 1.0)) {
    throw ConfigError("relative threshold must lie in [0, 1]");
  }
}

double partial_sim(const WeightedTokenSet& a, const WeightedTokenSet& b,
                   std::size_t i, std::size_t j, double s_a, double s_b,
                   double tau, Measure measure) {
  const WeightedTokenSet* x = &a;
  const WeightedTokenSet* y = &b;
  if (a.empty() || b.empty()) return 0.0;
  if (a.tokens.back().rank > b.tokens.back().rank) {
    std::swap(x, y);
    std::swap(i, j);
    std::swap(s_a, s_b);
  }
  const int norm = norm_of(measure);
  const auto& xt = x->tokens;
  const auto& yt = y->tokens;
  // Remaining overlap needed, with the comparison slack folded in.
  double o = equivalent_overlap(measure, a.norm_size, b.norm_size, tau) - kEps;
  double intersection = 0.0;
  double dot = 0.0;

  if (o < 0.0) {
    // Nothing left to prune against: plain merge.
    for (; i < xt.size(); ++i) {
      const TokenRank r = xt[i].rank;
      while (yt[j].rank < r) ++j;
      if (yt[j].rank == r) {
        const double wa = xt[i].weight;
        const double wb = yt[j].weight;
        intersection += wa < wb ? wa : wb;
        dot += wa * wb;
        ++j;
      }
    }
    i = xt.size();
  }

  for (; i < xt.size(); ++i) {
    const TokenRank r = xt[i].rank;
    while (yt[j].rank < r) {
      s_b -= norm_weight(yt[j].weight, norm);
      if (suffix_overlap_bound(measure, s_a, s_b) < o) return 0.0;
      ++j;
    }
    const double wa = xt[i].weight;
    if (yt[j].rank == r) {
      const double wb = yt[j].weight;
      const double lo = wa < wb ? wa : wb;
      o -= measure == Measure::kCosine ? wa * wb : lo;
      s_a -= norm_weight(wa, norm);
      s_b -= norm_weight(wb, norm);
      if (suffix_overlap_bound(measure, s_a, s_b) < o) return 0.0;
      intersection += lo;
      dot += wa * wb;
      ++j;
    } else {
      s_a -= norm_weight(wa, norm);
      if (suffix_overlap_bound(measure, s_a, s_b) < o) return 0.0;
    }
  }

  OverlapStats stats;
  stats.size_a = a.norm_size;
  stats.size_b = b.norm_size;
  stats.intersection = intersection;
  stats.dot_product = dot;
  stats.union_weight = stats.size_a + stats.size_b - intersection;
  return similarity(measure, stats);
}

PairSet ttrk_join(const TokenSetCollection& queries, const PpsIndex& index,
                  const JoinParams& params, const JoinOptions& options) {
  validate_params(params);
  if (index.measure() != params.measure) {
    throw ConfigError("index was built for " + std::string(to_string(index.measure())) +
                      ", join asks for " + std::string(to_string(params.measure)));
  }
  if (queries.norm() != norm_of(params.measure)) {
    throw ConfigError("query norm does not match measure");
  }
  if (params.tau < index.tau_build() - kEps) {
    throw ConfigError("tau is below the index build threshold");
  }

  JoinStats local;
  PairSet out;
  const std::size_t n = options.only ? options.only->size() : queries.size();
  if (options.only) {
    for (std::uint32_t q : *options.only) {
      if (q >= queries.size()) throw ConfigError("query subset index out of range");
    }
  }
  if (params.k == 0 || n == 0) {
    if (options.stats) *options.stats = local;
    return out;
  }

  detail::TraversalLimits limits;
  limits.max_rank = params.max_rank;
  limits.positional_filter = options.positional_filter;
  limits.pps_crop = options.pps_crop;
  limits.exclude_self = options.exclude_self;

  std::vector<std::vector<ScoredPair>> per_query(n);
  const int threads = options.trace ? 1 : resolve_threads(options.threads);
  const std::size_t num_targets = index.collection().size();

  std::uint64_t pre = 0;
  std::uint64_t cand = 0;
  double seconds = 0.0;
#pragma omp parallel num_threads(threads) reduction(+ : pre, cand, seconds)
  {
    detail::VisitedSet visited(num_targets);
    JoinState state;
    state.trace = options.trace;
#pragma omp for schedule(dynamic, 16)
    for (long long slot = 0; slot < static_cast<long long>(n); ++slot) {
      const std::uint32_t qi =
          options.only ? (*options.only)[slot] : static_cast<std::uint32_t>(slot);
      const auto& a = queries.sets[qi];
      if (a.empty()) continue;
      auto start = std::chrono::steady_clock::now();
      state.query = qi;
      state.q.reset(params.tau, params.tau_r, params.k);
      auto totals = detail::traverse_query(a, qi, index, limits, visited, state);
      pre += totals.pre_candidates;
      cand += totals.candidates;
      auto& result = per_query[slot];
      for (const auto& item : state.q.queue().sorted()) {
        result.push_back({qi, item.set, item.score});
      }
      seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                     .count();
    }
  }

  std::size_t total = 0;
  for (const auto& r : per_query) total += r.size();
  out.reserve(total);
  for (auto& r : per_query) out.insert(out.end(), r.begin(), r.end());

  local.pre_candidates = pre;
  local.candidates = cand;
  local.results = out.size();
  local.query_seconds = seconds;
  if (options.stats) *options.stats = local;
  return out;
}

PairSet naive_join(const TokenSetCollection& queries,
                   const TokenSetCollection& targets, const JoinParams& params,
                   bool exclude_self) {
  validate_params(params);
  PairSet out;
  if (params.k == 0) return out;
  std::vector<ScoredPair> row;
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    const auto& a = queries.sets[qi];
    if (a.empty()) continue;
    row.clear();
    double best = 0.0;
    for (std::size_t ti = 0; ti < targets.size(); ++ti) {
      if (exclude_self && ti == qi) continue;
      double s = similarity(params.measure, a, targets.sets[ti]);
      if (s > 0.0 && s >= params.tau) {
        row.push_back({static_cast<std::uint32_t>(qi), static_cast<std::uint32_t>(ti), s});
        best = std::max(best, s);
      }
    }
    const double cut = params.tau_r * best;
    std::erase_if(row, [&](const ScoredPair& p) { return p.score < cut; });
    std::sort(row.begin(), row.end(), pair_order);
    if (row.size() > params.k) row.resize(params.k);
    out.insert(out.end(), row.begin(), row.end());
  }
  return out;
}

double join_quality(const PairSet& exact, const PairSet& approx, double tau_r,
                    std::size_t num_queries) {
  if (num_queries == 0) return 1.0;
  std::vector<double> exact_sum(num_queries, 0.0);
  std::vector<double> exact_best(num_queries, 0.0);
  std::vector<bool> has_exact(num_queries, false);
  for (const auto& p : exact) {
    if (p.query >= num_queries) throw ConfigError("pair query out of range");
    exact_sum[p.query] += p.score;
    exact_best[p.query] = std::max(exact_best[p.query], p.score);
    has_exact[p.query] = true;
  }
  std::vector<double> kept(num_queries, 0.0);
  for (const auto& p : approx) {
    if (p.query >= num_queries) throw ConfigError("pair query out of range");
    if (p.score >= tau_r * exact_best[p.query]) kept[p.query] += p.score;
  }
  double total = 0.0;
  for (std::size_t q = 0; q < num_queries; ++q) {
    total += has_exact[q] && exact_sum[q] > 0.0 ? kept[q] / exact_sum[q] : 1.0;
  }
  return total / static_cast<double>(num_queries);
}

std::string check_approximate_join(const PairSet& pairs,
                                   const JoinParams& params) {
  std::map<std::uint32_t, std::vector<const ScoredPair*>> groups;
  std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
  for (const auto& p : pairs) {
    if (!seen.insert({p.query, p.target}).second) {
      std::ostringstream msg;
      msg << "duplicate pair (" << p.query << ", " << p.target << ")";
      return msg.str();
    }
    groups[p.query].push_back(&p);
  }
  for (const auto& [query, group] : groups) {
    std::ostringstream msg;
    if (group.size() > params.k) {
      msg << "query " << query << " has " << group.size() << " pairs, k = " << params.k;
      return msg.str();
    }
    double best = 0.0;
    for (const auto* p : group) best = std::max(best, p->score);
    for (const auto* p : group) {
      if (p->score < params.tau) {
        msg << "pair (" << query << ", " << p->target << ") is below tau";
        return msg.str();
      }
      if (p->score < params.tau_r * best) {
        msg << "pair (" << query << ", " << p->target << ") is below tau_r * best";
        return msg.str();
      }
    }
  }
  return {};
}

}  // namespace shallowblock
