#include "shallowblock/blocker.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <unordered_map>

#include <json.hpp>

#include "shallowblock/errors.hpp"
#include "threads.hpp"

namespace shallowblock {

namespace {

using Clock = std::chrono::steady_clock;

// Independent generator streams derived from the user seed.
enum Stream : std::uint64_t {
  kSampleStream = 1,
  kBootstrapStream = 2,
  kFoldStream = 3,
  kOptimizerStream = 4,
};

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream,
                         std::uint64_t sub = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(sub),
                    static_cast<std::uint32_t>(sub >> 32)};
  return std::mt19937_64(seq);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t sub = 0) {
  return make_rng(seed, stream, sub)();
}

std::vector<std::uint32_t> draw_sample(std::size_t n, std::size_t size,
                                       std::mt19937_64& rng) {
  std::vector<std::uint32_t> all(n);
  std::iota(all.begin(), all.end(), 0u);
  if (size >= n) return all;
  std::vector<std::uint32_t> out;
  out.reserve(size);
  std::sample(all.begin(), all.end(), std::back_inserter(out), size, rng);
  return out;
}

double elapsed(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

const char* direction_name(bool self_join, int query_side) {
  if (self_join) return "aa";
  return query_side == 0 ? "ab" : "ba";
}

JoinParams caps_for(Measure measure) {
  JoinParams caps;
  caps.measure = measure;
  return caps;
}

// Orders pairs as written: by query, then descending score, then target.
void sort_pairs(PairSet& pairs) {
  std::sort(pairs.begin(), pairs.end(), [](const ScoredPair& x, const ScoredPair& y) {
    if (x.query != y.query) return x.query < y.query;
    if (x.score != y.score) return x.score > y.score;
    return x.target < y.target;
  });
}

// Union keyed by (left, right); a pair found twice keeps its higher score.
class PairUnion {
 public:
  void add(std::uint32_t left, std::uint32_t right, double score) {
    auto key = (static_cast<std::uint64_t>(left) << 32) | right;
    auto [it, inserted] = scores_.try_emplace(key, score);
    if (!inserted) it->second = std::max(it->second, score);
  }
  PairSet take() {
    PairSet out;
    out.reserve(scores_.size());
    for (const auto& [key, score] : scores_) {
      out.push_back({static_cast<std::uint32_t>(key >> 32),
                     static_cast<std::uint32_t>(key & 0xffffffffu), score});
    }
    sort_pairs(out);
    scores_.clear();
    return out;
  }

 private:
  std::unordered_map<std::uint64_t, double> scores_;
};

void validate_budget(const BlockerBudget& budget) {
  if (budget.k == 0) throw ConfigError("pair budget k must be at least 1");
  if (!(budget.q > 0.0 && budget.q <= 1.0)) throw ConfigError("quality q must lie in (0, 1]");
  if (!(budget.q_p > 0.0 && budget.q_p < 1.0)) throw ConfigError("q_p must lie in (0, 1)");
}

double max_final_best(const TrajectorySet& trajectories) {
  double best = 0.0;
  for (const auto& t : trajectories) {
    if (!t.checkpoints.empty()) best = std::max(best, t.checkpoints.back().best);
  }
  return best;
}

}  // namespace

std::string JoinConfig::name() const {
  return model.name() + "/" + std::string(to_string(params.measure));
}

// ---------------------------------------------------------------- reports

std::string RunReport::to_json(int indent) const {
  using nlohmann::json;
  auto rank_json = [](std::uint64_t v) -> json {
    if (v == kUnbounded) return "inf";
    return v;
  };
  json dirs = json::array();
  for (const auto& d : directions) {
    json dj{{"direction", d.direction}, {"skipped", d.skipped}};
    if (!d.skipped) {
      const auto& p = d.config.params;
      dj["config"] = d.config.name();
      dj["tokenizer"] = std::string(to_string(d.config.model.tokenizer));
      dj["weighting"] = std::string(to_string(d.config.model.weighting));
      dj["measure"] = std::string(to_string(p.measure));
      dj["tau"] = p.tau;
      dj["tau_r"] = p.tau_r;
      dj["k"] = rank_json(p.k);
      dj["max_rank"] = rank_json(p.max_rank);
      dj["estimated_pairs"] = d.estimated_pairs;
      dj["estimated_runtime"] = d.estimated_runtime;
      if (d.estimated_recall >= 0.0) dj["estimated_recall"] = d.estimated_recall;
      dj["pairs"] = d.pairs;
      dj["seconds"] = d.seconds;
    }
    if (!d.discriminatory_power.empty()) {
      json dp = json::object();
      for (const auto& [name, value] : d.discriminatory_power) dp[name] = value;
      dj["discriminatory_power"] = dp;
    }
    dirs.push_back(dj);
  }
  json out{{"mode", mode}, {"seed", seed}, {"directions", dirs},
           {"pairs", pairs}, {"seconds", seconds}, {"warnings", warnings}};
  if (k > 0) out["k"] = k;
  if (mode.find("unsupervised") != std::string::npos) {
    out["q"] = q;
  } else {
    out["margin"] = margin;
    out["objective"] = objective;
    out["estimated_recall"] = estimated_recall;
  }
  return out.dump(indent);
}

// ---------------------------------------------------------------- unsupervised

double discriminatory_power(const PairSet& pairs, std::size_t num_queries,
                            std::size_t k_dp) {
  if (k_dp < 2) throw ConfigError("k_dp must be at least 2");
  if (num_queries == 0) return 0.0;
  std::map<std::uint32_t, std::vector<double>> by_query;
  for (const auto& p : pairs) by_query[p.query].push_back(p.score);
  if (by_query.size() > num_queries) throw ConfigError("more queries in pairs than num_queries");

  double inner_total = static_cast<double>(num_queries - by_query.size());
  for (auto& [query, scores] : by_query) {
    std::sort(scores.begin(), scores.end(), std::greater<>());
    if (scores.size() > k_dp) scores.resize(k_dp);
    const double best = scores.front();
    if (!(best > 0.0)) {
      inner_total += 1.0;
      continue;
    }
    double ratios = 0.0;
    for (double s : scores) ratios += s / best;
    inner_total += ratios / static_cast<double>(k_dp - 1) - 1.0;
  }
  return 1.0 - inner_total / static_cast<double>(num_queries);
}

BudgetSplit split_budget(std::uint64_t k, std::size_t size_a, std::size_t size_b) {
  if (size_a > size_b) throw ConfigError("split_budget expects |A| <= |B|");
  BudgetSplit out;
  if (size_a == 0 || size_b == 0) return out;
  const std::uint64_t total = k * size_a;
  out.k_ba = total / (2 * size_b);
  out.k_ab = (total - out.k_ba * size_b) / size_a;
  return out;
}

double threshold_resolution(Measure measure, double upper) {
  if (is_normalized(measure) || !(upper > 0.0)) return 1e-4;
  return 1e-4 * upper;
}

double balance_threshold(const TrajectorySet& trajectories, Measure measure,
                         double budget, double scale, bool relative) {
  const double upper =
      relative || is_normalized(measure) ? 1.0 : max_final_best(trajectories);
  if (!(upper > 0.0)) return 0.0;
  const double step = threshold_resolution(relative ? Measure::kJaccard : measure, upper);
  const auto steps = static_cast<std::uint64_t>(std::floor(upper / step + 1e-9));
  auto pairs_at = [&](std::uint64_t m) {
    JoinParams p;
    p.measure = measure;
    (relative ? p.tau_r : p.tau) = static_cast<double>(m) * step;
    return estimate_pair_upper_bound(p, trajectories, scale);
  };
  if (pairs_at(0) < budget) return 0.0;
  std::uint64_t lo = 0;
  std::uint64_t hi = steps;
  while (lo < hi) {
    std::uint64_t mid = lo + (hi - lo + 1) / 2;
    if (pairs_at(mid) >= budget) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  return static_cast<double>(lo) * step;
}

Corpus::Corpus(std::span<const std::string> a, std::span<const std::string> b,
               bool self_join, std::uint64_t max_trigram_chars)
    : a_(a.begin(), a.end()), b_(b.begin(), b.end()), self_(self_join) {
  std::uint64_t chars = 0;
  for (const auto& s : a_) chars += s.size();
  for (const auto& s : b_) chars += s.size();
  if (chars <= max_trigram_chars) tokenizers_.push_back(Tokenizer::kTrigram);
  tokenizers_.push_back(Tokenizer::kWord);
  for (Tokenizer t : tokenizers_) {
    vocabularies_.emplace(t, self_ ? build_vocabulary(t, a_) : build_vocabulary(t, a_, b_));
  }
}

std::shared_ptr<const TokenSetCollection> Corpus::encode(
    int s, const TokenSetModelConfig& model) const {
  return std::make_shared<const TokenSetCollection>(
      encode_collection(side(self_ ? 0 : s), vocabulary(model.tokenizer), model));
}

BalancedJoinResult balanced_ttrk_join(const Corpus& corpus, int query_side,
                                      const BlockerBudget& budget,
                                      const BlockerOptions& options) {
  BalancedJoinResult out;
  out.report.direction = direction_name(corpus.self_join(), query_side);
  const int target_side = corpus.self_join() ? 0 : 1 - query_side;
  const std::size_t nq = corpus.side(query_side).size();
  const std::size_t nt = corpus.side(target_side).size();
  if (budget.k == 0 || nq == 0 || nt == 0) {
    out.report.skipped = true;
    return out;
  }
  if (!(budget.q > 0.0 && budget.q <= 1.0)) throw ConfigError("quality q must lie in (0, 1]");
  const auto start = Clock::now();
  const bool self = corpus.self_join();
  const std::size_t k_dp = options.dp_k;
  const std::size_t n_sample = options.sample_size ? options.sample_size : 1000;

  auto rng = make_rng(options.seed, kSampleStream, static_cast<std::uint64_t>(query_side));
  const std::vector<std::uint32_t> sample = draw_sample(nq, n_sample, rng);
  const std::uint64_t bootstrap_seed =
      derive_seed(options.seed, kBootstrapStream, static_cast<std::uint64_t>(query_side));

  EstimateOptions est;
  est.threads = options.threads;
  est.exclude_self = self;
  est.work_clock = options.work_clock;
  est.keep_scores = budget.q < 1.0;
  JoinOptions join_options;
  join_options.exclude_self = self;
  join_options.threads = options.threads;

  struct Winner {
    TokenSetModelConfig model;
    Measure measure = Measure::kJaccard;
    std::shared_ptr<const TokenSetCollection> queries;
    PpsIndex index;
    TrajectorySet trajectories;
  } winner;
  double best_dp = -kInf;

  for (Tokenizer tok : corpus.tokenizers()) {
    for (Measure m : {Measure::kJaccard, Measure::kCosine, Measure::kOverlap}) {
      TokenSetModelConfig model{tok, Weighting::kTfIdf, norm_of(m)};
      auto queries = corpus.encode(query_side, model);
      auto targets = self ? queries : corpus.encode(target_side, model);
      IndexOptions io;
      io.threads = options.threads;
      PpsIndex index = build_pps_index(targets, 0.0, m, io);
      TrajectorySet psi = record_trajectories(*queries, sample, index, caps_for(m), est);

      JoinParams dp_params = caps_for(m);
      dp_params.k = k_dp;
      if (budget.q < 1.0) {
        dp_params.max_rank = quality_to_rank(budget.q, budget.q_p, 0.0, 0.0, k_dp, psi,
                                             options.bootstrap_resamples, bootstrap_seed);
      }
      JoinOptions dp_options = join_options;
      dp_options.only = &sample;
      PairSet top = ttrk_join(*queries, index, dp_params, dp_options);
      const double dp = discriminatory_power(top, sample.size(), k_dp);
      out.report.discriminatory_power.emplace_back(
          model.name() + "/" + std::string(to_string(m)), dp);
      if (dp > best_dp) {
        best_dp = dp;
        winner = {model, m, queries, std::move(index), std::move(psi)};
      }
    }
  }

  const Measure m = winner.measure;
  out.scale = static_cast<double>(nq) / static_cast<double>(sample.size());
  out.budget = static_cast<double>(budget.k) * static_cast<double>(nq);
  JoinParams params = caps_for(m);
  params.tau = balance_threshold(winner.trajectories, m, out.budget, out.scale, false);
  params.tau_r = balance_threshold(winner.trajectories, m, out.budget, out.scale, true);
  params.k = budget.k;
  if (budget.q < 1.0) {
    params.max_rank = quality_to_rank(budget.q, budget.q_p, params.tau, params.tau_r,
                                      params.k, winner.trajectories,
                                      options.bootstrap_resamples, bootstrap_seed);
  }

  out.pairs = ttrk_join(*winner.queries, winner.index, params, join_options);
  out.report.config = {winner.model, params};
  out.report.estimated_pairs =
      estimate_pair_upper_bound(params, winner.trajectories, out.scale);
  out.report.estimated_runtime = estimate_runtime_upper_bound(
      params, winner.trajectories, out.scale, resolve_threads(options.threads), m);
  out.report.pairs = out.pairs.size();
  out.report.seconds = elapsed(start);
  out.trajectories = std::move(winner.trajectories);
  return out;
}

BlockResult block_unsupervised(std::span<const std::string> a,
                               std::span<const std::string> b,
                               const BlockerBudget& budget,
                               const BlockerOptions& options) {
  validate_budget(budget);
  const auto start = Clock::now();
  BlockResult result;
  result.report.mode = "unsupervised";
  result.report.seed = options.seed;
  result.report.k = budget.k;
  result.report.q = budget.q;
  if (a.empty() || b.empty()) return result;

  // Side 0 of the corpus is the smaller collection.
  const bool flipped = a.size() > b.size();
  const Corpus corpus = flipped ? Corpus(b, a, false, options.max_trigram_chars)
                                : Corpus(a, b, false, options.max_trigram_chars);
  const BudgetSplit split = split_budget(budget.k, corpus.side(0).size(), corpus.side(1).size());

  PairUnion merged;
  for (int side = 0; side < 2; ++side) {
    BlockerBudget direction = budget;
    direction.k = side == 0 ? split.k_ab : split.k_ba;
    BalancedJoinResult r = balanced_ttrk_join(corpus, side, direction, options);
    // Report directions relative to the caller's (a, b).
    const bool from_a = (side == 0) != flipped;
    r.report.direction = from_a ? "ab" : "ba";
    for (const auto& p : r.pairs) {
      if (from_a) {
        merged.add(p.query, p.target, p.score);
      } else {
        merged.add(p.target, p.query, p.score);
      }
    }
    result.report.directions.push_back(std::move(r.report));
  }
  result.pairs = merged.take();
  result.report.pairs = result.pairs.size();
  result.report.seconds = elapsed(start);
  return result;
}

BlockResult block_dedup_unsupervised(std::span<const std::string> a,
                                     const BlockerBudget& budget,
                                     const BlockerOptions& options) {
  validate_budget(budget);
  const auto start = Clock::now();
  BlockResult result;
  result.report.mode = "dedup-unsupervised";
  result.report.seed = options.seed;
  result.report.k = budget.k;
  result.report.q = budget.q;
  if (a.size() < 2) return result;

  const Corpus corpus(a, {}, true, options.max_trigram_chars);
  BalancedJoinResult r = balanced_ttrk_join(corpus, 0, budget, options);
  PairUnion merged;
  for (const auto& p : r.pairs) {
    merged.add(std::min(p.query, p.target), std::max(p.query, p.target), p.score);
  }
  result.report.directions.push_back(std::move(r.report));
  result.pairs = merged.take();
  result.report.pairs = result.pairs.size();
  result.report.seconds = elapsed(start);
  return result;
}

// ---------------------------------------------------------------- supervised

Objective recall_target_objective(double target, double c_rt) {
  if (!(target > 0.0 && target <= 1.0)) throw ConfigError("recall target must lie in (0, 1]");
  if (!(c_rt >= 0.0)) throw ConfigError("c_rt must be non-negative");
  Objective f;
  f.name = "recall-target(R=" + std::to_string(target) + ", c_rt=" + std::to_string(c_rt) + ")";
  f.recall_target = target;
  f.key = [target, c_rt](const Outcome& o) -> ObjectiveKey {
    if (o.recall >= target - 1e-12) return {1.0, -(o.k_tilde + c_rt * o.runtime)};
    return {0.0, o.recall};
  };
  return f;
}

Objective linear_objective(double c_k, double c_rt) {
  if (!(c_k >= 0.0) || !(c_rt >= 0.0)) throw ConfigError("objective weights must be non-negative");
  Objective f;
  f.name = "linear(c_k=" + std::to_string(c_k) + ", c_rt=" + std::to_string(c_rt) + ")";
  f.key = [c_k, c_rt](const Outcome& o) -> ObjectiveKey {
    return {o.recall - c_k * o.k_tilde - c_rt * o.runtime, 0.0};
  };
  return f;
}

Outcome evaluate_solution(const Solution& s,
                          std::span<const DirectionEvidence> evidence,
                          std::size_t margin_index,
                          std::span<const std::uint32_t> subset,
                          const OptimizerOptions& options) {
  if (s.directions.size() != evidence.size()) {
    throw ConfigError("solution and evidence disagree on the number of directions");
  }
  Outcome o;
  std::size_t hits = 0;
  for (std::uint32_t g : subset) {
    bool hit = false;
    for (std::size_t d = 0; d < evidence.size() && !hit; ++d) {
      const DirectionChoice& c = s.directions[d];
      if (c.params.k == 0) continue;
      const auto& row = evidence[d].configs[c.config].conditions.conditions[margin_index];
      for (std::uint32_t slot : evidence[d].slots[g]) {
        if (row[slot].admits(c.params)) {
          hit = true;
          break;
        }
      }
    }
    hits += hit;
  }
  o.recall = subset.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(subset.size());
  for (std::size_t d = 0; d < evidence.size(); ++d) {
    const DirectionChoice& c = s.directions[d];
    if (c.params.k == 0) continue;
    const ConfigEvidence& e = evidence[d].configs[c.config];
    o.pairs += estimate_pair_upper_bound(c.params, e.trajectories, e.scale);
    o.runtime += estimate_runtime_upper_bound(c.params, e.trajectories, e.scale,
                                              options.workers, e.measure);
  }
  o.k_tilde = o.pairs / std::max(1.0, options.min_side);
  return o;
}

namespace {

DirectionChoice random_choice(const DirectionEvidence& dir, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  DirectionChoice c;
  c.config = std::uniform_int_distribution<std::size_t>(0, dir.configs.size() - 1)(rng);
  const ConfigEvidence& e = dir.configs[c.config];
  c.params.measure = e.measure;
  c.params.tau = u(rng) * e.tau_cap;
  c.params.tau_r = u(rng);
  const double r = u(rng);
  if (r < 0.125) {
    c.params.k = 0;
  } else if (r < 0.25) {
    c.params.k = kUnbounded;
  } else {
    const double span = std::log(static_cast<double>(e.max_k) + 1.0);
    c.params.k = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::exp(u(rng) * span)));
  }
  if (u(rng) < 0.5) {
    c.params.max_rank = kUnbounded;
  } else {
    const double span = std::log(static_cast<double>(e.max_rank));
    c.params.max_rank =
        std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::exp(u(rng) * span)));
  }
  return c;
}

// Exponentially spaced moves of every numeric parameter.
std::vector<Solution> neighbours(const Solution& s,
                                 std::span<const DirectionEvidence> evidence) {
  std::vector<Solution> out;
  auto emit = [&](std::size_t d, auto&& change) {
    Solution n = s;
    change(n.directions[d].params);
    const JoinParams& before = s.directions[d].params;
    const JoinParams& after = n.directions[d].params;
    if (after.tau != before.tau || after.tau_r != before.tau_r || after.k != before.k ||
        after.max_rank != before.max_rank) {
      out.push_back(std::move(n));
    }
  };
  static constexpr double kFactors[] = {1.05, 1.2, 2.0, 8.0};
  static constexpr std::int64_t kSteps[] = {1, 2, 8, 32};

  for (std::size_t d = 0; d < s.directions.size(); ++d) {
    const ConfigEvidence& e = evidence[d].configs[s.directions[d].config];
    const double tau_floor = 1e-4 * e.tau_cap;
    for (double f : kFactors) {
      auto scale_up = [&](double v, double floor, double cap) {
        return std::min(cap, v < floor ? floor * f : v * f);
      };
      auto scale_down = [&](double v, double floor) {
        double x = v / f;
        return x < floor ? 0.0 : x;
      };
      emit(d, [&](JoinParams& p) { p.tau = scale_up(p.tau, tau_floor, e.tau_cap); });
      emit(d, [&](JoinParams& p) { p.tau = scale_down(p.tau, tau_floor); });
      emit(d, [&](JoinParams& p) { p.tau_r = scale_up(p.tau_r, 1e-4, 1.0); });
      emit(d, [&](JoinParams& p) { p.tau_r = scale_down(p.tau_r, 1e-4); });
    }

    const std::uint64_t k = s.directions[d].params.k;
    const std::uint64_t k_base = k == kUnbounded ? e.max_k : k;
    auto set_k = [&](std::int64_t v) {
      emit(d, [&](JoinParams& p) {
        p.k = v <= 0 ? 0 : static_cast<std::uint64_t>(v);
      });
    };
    for (std::int64_t step : kSteps) {
      if (k != kUnbounded) set_k(static_cast<std::int64_t>(k_base) + step);
      set_k(static_cast<std::int64_t>(k_base) - step);
    }
    if (k != kUnbounded) {
      if (k >= e.max_k) {
        emit(d, [&](JoinParams& p) { p.k = kUnbounded; });
      } else {
        set_k(static_cast<std::int64_t>(std::max<std::uint64_t>(1, 2 * k)));
      }
    }
    set_k(static_cast<std::int64_t>(k_base / 2));

    const std::uint64_t rank = s.directions[d].params.max_rank;
    for (std::uint64_t f : {2u, 8u}) {
      if (rank == kUnbounded) {
        emit(d, [&](JoinParams& p) { p.max_rank = std::max<std::uint64_t>(1, e.max_rank / f); });
        continue;
      }
      emit(d, [&](JoinParams& p) {
        p.max_rank = rank * f >= e.max_rank ? kUnbounded : rank * f;
      });
      emit(d, [&](JoinParams& p) { p.max_rank = std::max<std::uint64_t>(1, rank / f); });
    }
  }
  return out;
}

}  // namespace

OptimizedSolution optimize_join_configs(const Objective& f,
                                        std::span<const DirectionEvidence> evidence,
                                        std::size_t margin_index,
                                        std::span<const std::uint32_t> subset,
                                        const OptimizerOptions& options) {
  if (evidence.empty()) throw ConfigError("no directions to optimize");
  for (const auto& dir : evidence) {
    if (dir.configs.empty()) throw ConfigError("direction " + dir.direction + " has no configurations");
  }
  if (subset.empty()) throw ConfigError("the optimizer needs at least one known match");
  if (options.restarts < 1 || options.random_draws < 1) {
    throw ConfigError("restarts and random draws must be positive");
  }

  std::vector<OptimizedSolution> results(static_cast<std::size_t>(options.restarts));
  const int threads = resolve_threads(options.threads);
#pragma omp parallel for num_threads(threads) schedule(dynamic, 1)
  for (int r = 0; r < options.restarts; ++r) {
    auto rng = make_rng(options.seed, kOptimizerStream, static_cast<std::uint64_t>(r));
    OptimizedSolution& best = results[static_cast<std::size_t>(r)];
    auto score = [&](const Solution& s, Outcome& o) {
      o = evaluate_solution(s, evidence, margin_index, subset, options);
      ++best.evaluations;
      return f.key(o);
    };
    for (int draw = 0; draw < options.random_draws; ++draw) {
      Solution s;
      for (const auto& dir : evidence) s.directions.push_back(random_choice(dir, rng));
      Outcome o;
      ObjectiveKey key = score(s, o);
      if (draw == 0 || key > best.key) best = {s, o, key, best.evaluations};
    }
    for (int iteration = 0; iteration < 10000; ++iteration) {
      OptimizedSolution step = best;
      for (const Solution& n : neighbours(best.solution, evidence)) {
        Outcome o;
        ObjectiveKey key = score(n, o);
        if (key > step.key) step = {n, o, key, 0};
      }
      if (!(step.key > best.key)) break;
      const std::uint64_t count = best.evaluations;
      best = step;
      best.evaluations = count;
    }
  }

  OptimizedSolution out = results.front();
  std::uint64_t evaluations = 0;
  for (const auto& r : results) {
    evaluations += r.evaluations;
    if (r.key > out.key) out = r;
  }
  out.evaluations = evaluations;
  return out;
}

namespace {

struct SupervisedInput {
  const Corpus* corpus;
  std::vector<KnownMatch> matches;  // global, in (side 0, side 1) ids
  std::size_t sizes[2];
};

std::vector<double> margins_with_zero(std::vector<double> margins) {
  if (std::find(margins.begin(), margins.end(), 0.0) == margins.end()) {
    margins.insert(margins.begin(), 0.0);
  }
  return margins;
}

// Trajectories and recall conditions for all 16 configurations of one
// direction. `oriented` holds the matches as (query, target) of this direction.
DirectionEvidence collect_evidence(const Corpus& corpus, int query_side,
                                   std::span<const KnownMatch> oriented,
                                   std::vector<std::vector<std::uint32_t>> slots,
                                   std::span<const double> margins,
                                   const BlockerOptions& options) {
  DirectionEvidence out;
  out.direction = direction_name(corpus.self_join(), query_side);
  out.slots = std::move(slots);
  const bool self = corpus.self_join();
  const int target_side = self ? 0 : 1 - query_side;
  const std::size_t nq = corpus.side(query_side).size();
  const std::size_t n_sample = options.sample_size ? options.sample_size : 500;
  auto rng = make_rng(options.seed, kSampleStream, static_cast<std::uint64_t>(query_side));
  const std::vector<std::uint32_t> sample = draw_sample(nq, n_sample, rng);

  EstimateOptions est;
  est.threads = options.threads;
  est.exclude_self = self;
  est.work_clock = options.work_clock;
  est.keep_scores = false;

  for (Tokenizer tok : corpus.tokenizers()) {
    for (Weighting w : {Weighting::kBinary, Weighting::kTfIdf}) {
      std::shared_ptr<const TokenSetCollection> encoded_q[3];
      std::shared_ptr<const TokenSetCollection> encoded_t[3];
      for (Measure m : {Measure::kJaccard, Measure::kDice, Measure::kCosine, Measure::kOverlap}) {
        const int norm = norm_of(m);
        TokenSetModelConfig model{tok, w, norm};
        if (!encoded_q[norm]) {
          encoded_q[norm] = corpus.encode(query_side, model);
          encoded_t[norm] = self ? encoded_q[norm] : corpus.encode(target_side, model);
        }
        IndexOptions io;
        io.threads = options.threads;
        PpsIndex index = build_pps_index(encoded_t[norm], 0.0, m, io);
        ConfigEvidence e;
        e.model = model;
        e.measure = m;
        e.trajectories = record_trajectories(*encoded_q[norm], sample, index, caps_for(m), est);
        e.conditions = find_recall_conditions(*encoded_q[norm], index, oriented, margins,
                                              caps_for(m), est);
        e.scale = static_cast<double>(nq) / static_cast<double>(std::max<std::size_t>(1, sample.size()));
        double cap = max_final_best(e.trajectories);
        for (const auto& c : e.conditions.conditions.front()) {
          if (c.reachable) cap = std::max(cap, c.score);
        }
        e.tau_cap = is_normalized(m) ? 1.0 : std::max(cap, 1e-9);
        for (const auto& t : e.trajectories) {
          e.max_k = std::max(e.max_k, t.final_count());
          if (!t.checkpoints.empty()) e.max_rank = std::max(e.max_rank, t.final_rank());
        }
        out.configs.push_back(std::move(e));
      }
    }
  }
  return out;
}

struct Execution {
  PairSet pairs;
  DirectionReport report;
};

Execution execute_direction(const Corpus& corpus, int query_side,
                            const DirectionEvidence& evidence,
                            const DirectionChoice& choice, const BlockerOptions& options) {
  Execution out;
  out.report.direction = evidence.direction;
  if (choice.params.k == 0) {
    out.report.skipped = true;
    return out;
  }
  const auto start = Clock::now();
  const ConfigEvidence& e = evidence.configs[choice.config];
  const bool self = corpus.self_join();
  auto queries = corpus.encode(query_side, e.model);
  auto targets = self ? queries : corpus.encode(self ? 0 : 1 - query_side, e.model);
  // Traversal ranks refer to the full index; without a cutoff the join can
  // index only what its threshold needs.
  const double tau_build = choice.params.max_rank == kUnbounded ? choice.params.tau : 0.0;
  IndexOptions io;
  io.threads = options.threads;
  PpsIndex index = build_pps_index(targets, tau_build, e.measure, io);
  JoinOptions jo;
  jo.exclude_self = self;
  jo.threads = options.threads;
  out.pairs = ttrk_join(*queries, index, choice.params, jo);
  out.report.config = {e.model, choice.params};
  out.report.estimated_pairs = estimate_pair_upper_bound(choice.params, e.trajectories, e.scale);
  out.report.estimated_runtime = estimate_runtime_upper_bound(
      choice.params, e.trajectories, e.scale, resolve_threads(options.threads), e.measure);
  out.report.pairs = out.pairs.size();
  out.report.seconds = elapsed(start);
  return out;
}

// Margin by cross validation, final optimization on all matches.
OptimizedSolution choose_solution(const Objective& f,
                                  std::span<const DirectionEvidence> evidence,
                                  std::span<const double> margins, std::size_t num_matches,
                                  const OptimizerOptions& base, const BlockerOptions& options,
                                  RunReport& report) {
  std::vector<std::uint32_t> all(num_matches);
  std::iota(all.begin(), all.end(), 0u);
  const RecallConditions& reference = evidence.front().configs.front().conditions;
  const std::size_t zero = reference.margin_index(0.0);

  std::size_t chosen = zero;
  const int folds = options.folds;
  if (folds >= 2 && num_matches >= static_cast<std::size_t>(folds)) {
    std::vector<std::uint32_t> order = all;
    auto rng = make_rng(options.seed, kFoldStream);
    std::shuffle(order.begin(), order.end(), rng);
    ObjectiveKey best_key{};
    bool have = false;
    for (std::size_t mi = 0; mi < margins.size(); ++mi) {
      const std::size_t margin = reference.margin_index(margins[mi]);
      Outcome mean;
      for (int fold = 0; fold < folds; ++fold) {
        std::vector<std::uint32_t> train;
        std::vector<std::uint32_t> validation;
        for (std::size_t i = 0; i < order.size(); ++i) {
          (static_cast<int>(i % folds) == fold ? validation : train).push_back(order[i]);
        }
        std::sort(train.begin(), train.end());
        std::sort(validation.begin(), validation.end());
        OptimizerOptions oo = base;
        oo.seed = derive_seed(options.seed, kOptimizerStream, mi * 64 + fold + 1);
        OptimizedSolution s = optimize_join_configs(f, evidence, margin, train, oo);
        Outcome v = evaluate_solution(s.solution, evidence, zero, validation, oo);
        mean.recall += v.recall / folds;
        mean.pairs += v.pairs / folds;
        mean.runtime += v.runtime / folds;
        mean.k_tilde += v.k_tilde / folds;
      }
      ObjectiveKey key = f.key(mean);
      if (!have || key > best_key) {
        best_key = key;
        chosen = margin;
        have = true;
      }
    }
  } else {
    report.warnings.push_back("too few matches for cross validation; margin fixed at 0");
  }

  report.margin = reference.margins[chosen];
  OptimizerOptions oo = base;
  oo.seed = derive_seed(options.seed, kOptimizerStream, 0);
  OptimizedSolution s = optimize_join_configs(f, evidence, chosen, all, oo);
  // Recall without the margin: the estimate for the matches as they are.
  s.outcome = evaluate_solution(s.solution, evidence, zero, all, oo);
  report.estimated_recall = s.outcome.recall;
  if (f.recall_target > 0.0 && s.outcome.recall < f.recall_target - 1e-12) {
    report.warnings.push_back("recall target " + std::to_string(f.recall_target) +
                              " is not reached; best estimated recall is " +
                              std::to_string(s.outcome.recall));
  }
  return s;
}

void check_matches(std::span<const KnownMatch> matches, std::size_t na, std::size_t nb) {
  if (matches.empty()) throw ConfigError("supervised blocking needs at least one known match");
  for (const auto& m : matches) {
    if (m.query >= na || m.target >= nb) {
      throw DataError("match (" + std::to_string(m.query) + ", " + std::to_string(m.target) +
                      ") references an unknown record");
    }
  }
}

}  // namespace

BlockResult block_supervised(std::span<const std::string> a,
                             std::span<const std::string> b,
                             std::span<const KnownMatch> matches,
                             const Objective& f, const BlockerOptions& options) {
  check_matches(matches, a.size(), b.size());
  const auto start = Clock::now();
  BlockResult result;
  result.report.mode = "supervised";
  result.report.seed = options.seed;
  result.report.objective = f.name;

  const Corpus corpus(a, b, false, options.max_trigram_chars);
  const std::vector<double> margins = margins_with_zero(options.margins);
  std::vector<KnownMatch> flipped;
  std::vector<std::vector<std::uint32_t>> slots(matches.size());
  for (std::uint32_t g = 0; g < matches.size(); ++g) {
    flipped.push_back({matches[g].target, matches[g].query});
    slots[g] = {g};
  }
  std::vector<DirectionEvidence> evidence;
  evidence.push_back(collect_evidence(corpus, 0, matches, slots, margins, options));
  evidence.push_back(collect_evidence(corpus, 1, flipped, slots, margins, options));

  OptimizerOptions oo;
  oo.restarts = options.restarts;
  oo.random_draws = options.random_draws;
  oo.threads = options.threads;
  oo.workers = resolve_threads(options.threads);
  oo.min_side = static_cast<double>(std::min(a.size(), b.size()));
  OptimizedSolution s =
      choose_solution(f, evidence, options.margins, matches.size(), oo, options, result.report);

  PairUnion merged;
  for (int side = 0; side < 2; ++side) {
    Execution e = execute_direction(corpus, side, evidence[side], s.solution.directions[side], options);
    for (const auto& p : e.pairs) {
      if (side == 0) {
        merged.add(p.query, p.target, p.score);
      } else {
        merged.add(p.target, p.query, p.score);
      }
    }
    std::vector<std::uint32_t> all(matches.size());
    std::iota(all.begin(), all.end(), 0u);
    Solution alone = s.solution;
    alone.directions[1 - side].params.k = 0;
    e.report.estimated_recall =
        evaluate_solution(alone, evidence, evidence[0].configs[0].conditions.margin_index(0.0), all, oo).recall;
    result.report.directions.push_back(std::move(e.report));
  }
  result.pairs = merged.take();
  result.report.pairs = result.pairs.size();
  result.report.seconds = elapsed(start);
  return result;
}

BlockResult block_dedup_supervised(std::span<const std::string> a,
                                   std::span<const KnownMatch> matches,
                                   const Objective& f, const BlockerOptions& options) {
  check_matches(matches, a.size(), a.size());
  for (const auto& m : matches) {
    if (m.query == m.target) {
      throw DataError("match (" + std::to_string(m.query) + ", " + std::to_string(m.target) +
                      ") pairs a record with itself");
    }
  }
  const auto start = Clock::now();
  BlockResult result;
  result.report.mode = "dedup-supervised";
  result.report.seed = options.seed;
  result.report.objective = f.name;

  const Corpus corpus(a, {}, true, options.max_trigram_chars);
  const std::vector<double> margins = margins_with_zero(options.margins);
  // Either record of a match may find the other.
  std::vector<KnownMatch> both(matches.begin(), matches.end());
  std::vector<std::vector<std::uint32_t>> slots(matches.size());
  const auto n = static_cast<std::uint32_t>(matches.size());
  for (std::uint32_t g = 0; g < n; ++g) {
    both.push_back({matches[g].target, matches[g].query});
    slots[g] = {g, g + n};
  }
  std::vector<DirectionEvidence> evidence;
  evidence.push_back(collect_evidence(corpus, 0, both, slots, margins, options));

  OptimizerOptions oo;
  oo.restarts = options.restarts;
  oo.random_draws = options.random_draws;
  oo.threads = options.threads;
  oo.workers = resolve_threads(options.threads);
  oo.min_side = static_cast<double>(a.size());
  OptimizedSolution s =
      choose_solution(f, evidence, options.margins, matches.size(), oo, options, result.report);

  Execution e = execute_direction(corpus, 0, evidence[0], s.solution.directions[0], options);
  PairUnion merged;
  for (const auto& p : e.pairs) {
    merged.add(std::min(p.query, p.target), std::max(p.query, p.target), p.score);
  }
  e.report.estimated_recall = result.report.estimated_recall;
  result.report.directions.push_back(std::move(e.report));
  result.pairs = merged.take();
  result.report.pairs = result.pairs.size();
  result.report.seconds = elapsed(start);
  return result;
}

}  // namespace shallowblock
