// Acceptance checks: one PASS/FAIL/SKIP line per criterion.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "fixtures.hpp"
#include "shallowblock/blocker.hpp"
#include "shallowblock/estimate.hpp"
#include "shallowblock/join.hpp"
#include "shallowblock/pps_index.hpp"
#include "shallowblock/records.hpp"

using namespace shallowblock;

namespace {

enum class Verdict { kPass, kFail, kSkip };

struct CheckResult {
  Verdict verdict = Verdict::kFail;
  std::string detail;
};

CheckResult pass_if(bool ok, std::string detail) {
  return {ok ? Verdict::kPass : Verdict::kFail, std::move(detail)};
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

// ---------------------------------------------------------------- fuzz corpus

struct FuzzCase {
  fx::Encoded enc;
  JoinParams params;
  Weighting weighting;
};

std::vector<FuzzCase> fuzz_corpus(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<FuzzCase> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t vocab = 1 + rng() % 30;
    auto a = fx::random_records(rng, 1 + rng() % 50, vocab, 1 + rng() % 8);
    auto b = fx::random_records(rng, 1 + rng() % 50, vocab, 1 + rng() % 8);
    const Measure m = fx::kMeasures[i % 4];
    const Weighting w = (i / 4) % 2 ? Weighting::kTfIdf : Weighting::kBinary;
    FuzzCase c{fx::encode_pair(a, b, m, w), {}, w};
    const double cap = std::max(fx::max_norm_size(c.enc.queries), fx::max_norm_size(*c.enc.targets));
    c.params = fx::random_params(rng, m, cap);
    out.push_back(std::move(c));
  }
  return out;
}

CheckResult oracle_equivalence() {
  auto corpus = fuzz_corpus(1000, 101);
  std::size_t bad = 0, pairs = 0;
  std::string first;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& c = corpus[i];
    auto idx = build_pps_index(c.enc.targets, c.params.tau, c.params.measure);
    auto fast = ttrk_join(c.enc.queries, idx, c.params);
    auto naive = naive_join(c.enc.queries, *c.enc.targets, c.params);
    pairs += naive.size();
    std::string why;
    if (!fx::same_pairs(fast, naive, &why)) {
      if (bad++ == 0) first = "case " + std::to_string(i) + ": " + why;
    }
  }
  return pass_if(bad == 0, std::to_string(corpus.size() - bad) + "/1000 cases equal (" +
                               std::to_string(pairs) + " pairs)" +
                               (bad ? "; first mismatch " + first : ""));
}

// ---------------------------------------------------------------- worked example

CheckResult worked_example() {
  const std::vector<std::vector<double>> sims{{0.5, 0.8, 0.1, 0.4, 0.6, 0.6},
                                              {0.4, 0.3, 0.5, 0.9, 0.2, 0.4}};
  // one private token per (query, target) cell, weighted by its similarity
  TokenSetCollection queries;
  queries.config = {Tokenizer::kWord, Weighting::kTfIdf, 1};
  auto targets = std::make_shared<TokenSetCollection>();
  targets->config = queries.config;
  for (std::uint32_t q = 0; q < 2; ++q) {
    std::vector<WeightedToken> toks;
    for (std::uint32_t t = 0; t < 6; ++t) toks.push_back({TokenRank(q * 6 + t), sims[q][t]});
    queries.sets.push_back(make_token_set(toks, 1, q));
  }
  for (std::uint32_t t = 0; t < 6; ++t) {
    std::vector<WeightedToken> toks;
    for (std::uint32_t q = 0; q < 2; ++q) toks.push_back({TokenRank(q * 6 + t), sims[q][t]});
    targets->sets.push_back(make_token_set(toks, 1, t));
  }
  auto cells = [&](std::vector<std::pair<int, int>> xs) {
    PairSet p;
    for (auto [q, t] : xs) p.push_back({std::uint32_t(q), std::uint32_t(t), sims[q][t]});
    return p;
  };
  JoinParams params;
  params.measure = Measure::kOverlap;
  params.tau = 0.2;
  params.tau_r = 0.5;
  params.k = 4;
  const PairSet expected = cells({{0, 1}, {0, 4}, {0, 5}, {0, 0}, {1, 3}, {1, 2}});
  auto idx = build_pps_index(targets, params.tau, params.measure);
  std::shared_ptr<const TokenSetCollection> ctargets = targets;
  const bool join_ok = fx::same_pairs(ttrk_join(queries, idx, params), expected) &&
                       fx::same_pairs(naive_join(queries, *ctargets, params), expected);
  const double q1 = join_quality(expected, cells({{0, 1}, {0, 3}, {0, 4}, {0, 5}, {1, 3}}), 0.5, 2);
  const double q2 = join_quality(
      expected, cells({{0, 0}, {0, 3}, {0, 4}, {0, 5}, {1, 0}, {1, 1}, {1, 2}, {1, 5}}), 0.5, 2);
  // the printed fractions; the printed 0.80 / 0.60 are their two-decimal roundings
  const double f1 = 0.5 * ((0.8 + 0.4 + 0.6 + 0.6) / (0.5 + 0.8 + 0.6 + 0.6) + 0.9 / (0.5 + 0.9));
  const double f2 = 0.5 * ((0.4 + 0.5 + 0.6 + 0.6) / (0.5 + 0.8 + 0.6 + 0.6) + 0.5 / (0.5 + 0.9));
  const bool q_ok = std::abs(q1 - f1) < 1e-9 && std::abs(q2 - f2) < 1e-9 &&
                    fmt("%.2f", q1) == "0.80" && fmt("%.2f", q2) == "0.60";
  return pass_if(join_ok && q_ok, std::string("join P ") + (join_ok ? "exact" : "WRONG") +
                                      "; q1=" + fmt("%.10f", q1) + " q2=" + fmt("%.10f", q2) +
                                      " (print as 0.80 / 0.60; equal to the printed fractions "
                                      "within 1e-9)");
}

// ---------------------------------------------------------------- filter safety

CheckResult filter_safety() {
  auto corpus = fuzz_corpus(1000, 101);
  std::size_t changed = 0, fewer_or_equal = 0;
  for (const auto& c : corpus) {
    auto reference = naive_join(c.enc.queries, *c.enc.targets, c.params);
    for (bool partition : {true, false}) {
      IndexOptions io;
      io.partition = partition;
      auto idx = build_pps_index(c.enc.targets, c.params.tau, c.params.measure, io);
      for (int mask = 0; mask < 4; ++mask) {
        JoinOptions jo;
        jo.positional_filter = mask & 1;
        jo.pps_crop = mask & 2;
        changed += !fx::same_pairs(ttrk_join(c.enc.queries, idx, c.params, jo), reference);
      }
    }
    auto idx = build_pps_index(c.enc.targets, c.params.tau, c.params.measure);
    JoinStats on, off;
    JoinOptions jo;
    jo.stats = &on;
    ttrk_join(c.enc.queries, idx, c.params, jo);
    jo.stats = &off;
    jo.pps_crop = false;
    ttrk_join(c.enc.queries, idx, c.params, jo);
    fewer_or_equal += on.pre_candidates <= off.pre_candidates;
  }
  const double share = fewer_or_equal / double(corpus.size());
  return pass_if(changed == 0 && share >= 0.95,
                 std::to_string(changed) + " outputs changed over 8000 filter combinations; "
                 "pre-candidates(PPS on) <= off in " + fmt("%.1f", 100 * share) + "% of cases");
}

// ---------------------------------------------------------------- budget

BlockerOptions fast_blocker(std::uint64_t seed) {
  BlockerOptions o;
  o.seed = seed;
  o.bootstrap_resamples = 100;
  return o;
}

CheckResult budget_guarantee() {
  std::mt19937_64 rng(404);
  std::size_t violations = 0, total_pairs = 0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t vocab = 5 + rng() % 80;
    auto a = fx::random_records(rng, 1 + rng() % 120, vocab, 1 + rng() % 10);
    auto b = fx::random_records(rng, 1 + rng() % 120, vocab, 1 + rng() % 10);
    const std::uint64_t k = 1 + rng() % 12;
    const double q = i % 4 == 0 ? 0.8 : 1.0;
    auto r = block_unsupervised(a, b, {k, q}, fast_blocker(i));
    total_pairs += r.pairs.size();
    violations += r.pairs.size() > k * std::min(a.size(), b.size());
  }
  return pass_if(violations == 0, std::to_string(violations) + " violations over 200 datasets (" +
                                      std::to_string(total_pairs) + " pairs)");
}

// ---------------------------------------------------------------- balance

CheckResult balance_property() {
  std::mt19937_64 rng(505);
  std::size_t checks = 0, bad = 0, zero = 0;
  std::string first;
  for (int i = 0; i < 100; ++i) {
    const std::size_t vocab = 10 + rng() % 60;
    auto a = fx::random_records(rng, 10 + rng() % 60, vocab, 1 + rng() % 8);
    auto b = fx::random_records(rng, a.size() + rng() % 60, vocab, 1 + rng() % 8);
    Corpus corpus(a, b, false, 100'000'000);
    const std::uint64_t k = 1 + rng() % 8;
    auto r = balanced_ttrk_join(corpus, 0, {k, 1.0}, fast_blocker(i));
    const Measure m = r.report.config.params.measure;
    double max_best = 0.0;
    for (const auto& t : r.trajectories) {
      if (!t.checkpoints.empty()) max_best = std::max(max_best, t.checkpoints.back().best);
    }
    for (bool relative : {false, true}) {
      const double chosen = relative ? r.report.config.params.tau_r : r.report.config.params.tau;
      const double upper = relative || is_normalized(m) ? 1.0 : max_best;
      const double step = threshold_resolution(relative ? Measure::kJaccard : m, upper);
      auto pairs_at = [&](double v) {
        JoinParams p;
        p.measure = m;
        (relative ? p.tau_r : p.tau) = v;
        return estimate_pair_upper_bound(p, r.trajectories, r.scale);
      };
      ++checks;
      const double grid = std::round(chosen / step);
      const double next = (grid + 1.0) * step;
      bool ok = std::abs(grid * step - chosen) < 1e-12;
      if (pairs_at(0.0) < r.budget) {
        // even the loosest threshold cannot fill the budget
        ok = ok && chosen == 0.0;
        ++zero;
      } else {
        ok = ok && pairs_at(chosen) >= r.budget;
        if (next <= upper * (1.0 + 1e-12)) ok = ok && pairs_at(next) < r.budget;
      }
      if (!ok && bad++ == 0) {
        first = "dataset " + std::to_string(i) + (relative ? " tau_r" : " tau");
      }
    }
  }
  return pass_if(bad == 0, std::to_string(checks - bad) + "/" + std::to_string(checks) +
                               " thresholds balanced (" + std::to_string(zero) +
                               " infeasible budgets resolved to 0)" +
                               (bad ? "; first failure " + first : ""));
}

// ---------------------------------------------------------------- approximation

CheckResult approximation_guarantee() {
  std::mt19937_64 rng(606);
  const Measure measures[] = {Measure::kJaccard, Measure::kCosine, Measure::kDice};
  std::size_t reached = 0;
  double worst = 1.0;
  const int datasets = 100;
  for (int i = 0; i < datasets; ++i) {
    fx::ZipfWords words(4000 + rng() % 4000, 0.8 + 0.4 * (rng() % 100) / 100.0);
    std::uniform_int_distribution<std::size_t> len(3, 14);
    std::vector<std::string> a, b;
    for (int r = 0; r < 2000; ++r) a.push_back(words.record(rng, len(rng)));
    for (int r = 0; r < 2000; ++r) b.push_back(words.record(rng, len(rng)));
    const Measure m = measures[i % 3];
    auto enc = fx::encode_pair(a, b, m, Weighting::kTfIdf);
    auto idx = build_pps_index(enc.targets, 0.0, m);
    JoinParams params;
    params.measure = m;
    params.tau = 0.3 * (rng() % 100) / 100.0;
    params.tau_r = 0.8 * (rng() % 100) / 100.0;
    params.k = 1 + rng() % 20;
    std::vector<std::uint32_t> sample(2000);
    std::iota(sample.begin(), sample.end(), 0u);
    std::shuffle(sample.begin(), sample.end(), rng);
    sample.resize(1000);
    JoinParams caps;
    caps.measure = m;
    EstimateOptions est;
    est.work_clock = true;
    auto traj = record_trajectories(enc.queries, sample, idx, caps, est);
    JoinParams approx = params;
    approx.max_rank = quality_to_rank(0.9, 0.95, params.tau, params.tau_r, params.k, traj, 200, i);
    auto exact = ttrk_join(enc.queries, idx, params);
    auto got = ttrk_join(enc.queries, idx, approx);
    const double q = join_quality(exact, got, params.tau_r, a.size());
    worst = std::min(worst, q);
    reached += q >= 0.9;
  }
  return pass_if(reached >= 90, std::to_string(reached) + "/" + std::to_string(datasets) +
                                    " datasets reach quality 0.9 (worst " + fmt("%.4f", worst) +
                                    ")");
}

// ---------------------------------------------------------------- estimators

CheckResult estimator_soundness() {
  std::mt19937_64 rng(707);
  std::size_t draws = 0, unsound = 0;
  std::string first;
  for (int i = 0; i < 200; ++i) {
    const std::size_t vocab = 5 + rng() % 60;
    auto a = fx::random_records(rng, 5 + rng() % 80, vocab, 1 + rng() % 9);
    auto b = fx::random_records(rng, 5 + rng() % 80, vocab, 1 + rng() % 9);
    const Measure m = fx::kMeasures[i % 4];
    auto enc = fx::encode_pair(a, b, m, i % 3 ? Weighting::kTfIdf : Weighting::kBinary);
    auto idx = build_pps_index(enc.targets, 0.0, m);
    std::vector<std::uint32_t> sample;
    for (std::uint32_t q = 0; q < a.size(); ++q) {
      if (rng() % 2) sample.push_back(q);
    }
    if (sample.empty()) sample.push_back(0);
    JoinParams caps;
    caps.measure = m;
    EstimateOptions est;
    est.work_clock = true;
    auto traj = record_trajectories(enc.queries, sample, idx, caps, est);
    std::uint64_t max_rank = 1;
    for (const auto& t : traj) max_rank = std::max(max_rank, t.final_rank());
    const double cap = std::max(fx::max_norm_size(enc.queries), fx::max_norm_size(*enc.targets));
    for (int d = 0; d < 10; ++d) {
      JoinParams p = fx::random_params(rng, m, cap);
      p.tau *= 0.5;
      if (rng() % 4 == 0) p.k = kUnbounded;
      if (rng() % 2) p.max_rank = 1 + rng() % (max_rank + 2);
      JoinOptions jo;
      jo.only = &sample;
      const double actual = ttrk_join(enc.queries, idx, p, jo).size();
      const double bound = estimate_pair_upper_bound(p, traj, 1.0);
      ++draws;
      if (bound + 1e-9 < actual && unsound++ == 0) {
        first = "dataset " + std::to_string(i) + ": bound " + fmt("%.0f", bound) + " < " +
                fmt("%.0f", actual);
      }
    }
  }

  // wall-clock runtime estimates on mid-size instances
  std::size_t within = 0, timed = 0;
  std::vector<double> ratios;
  for (int i = 0; i < 30; ++i) {
    fx::ZipfWords words(3000 + rng() % 3000, 1.0);
    std::uniform_int_distribution<std::size_t> len(4, 14);
    std::vector<std::string> a, b;
    for (int r = 0; r < 1000; ++r) a.push_back(words.record(rng, len(rng)));
    for (int r = 0; r < 3000; ++r) b.push_back(words.record(rng, len(rng)));
    const Measure m = fx::kMeasures[i % 4];
    auto enc = fx::encode_pair(a, b, m, Weighting::kTfIdf);
    IndexOptions io;
    io.threads = 1;
    auto idx = build_pps_index(enc.targets, 0.0, m, io);
    std::vector<std::uint32_t> sample(a.size());
    std::iota(sample.begin(), sample.end(), 0u);
    JoinParams caps;
    caps.measure = m;
    EstimateOptions est;
    est.threads = 1;
    auto traj = record_trajectories(enc.queries, sample, idx, caps, est);
    std::uint64_t max_rank = 1;
    for (const auto& t : traj) max_rank = std::max(max_rank, t.final_rank());
    const double cap = std::max(fx::max_norm_size(enc.queries), fx::max_norm_size(*enc.targets));
    JoinParams p = fx::random_params(rng, m, cap);
    p.tau *= 0.5;
    if (i % 3 == 0) p.max_rank = 1 + rng() % max_rank;
    JoinStats stats;
    JoinOptions jo;
    jo.threads = 1;
    jo.stats = &stats;
    ttrk_join(enc.queries, idx, p, jo);
    const double estimate = estimate_runtime_upper_bound(p, traj, 1.0, 1, m);
    const double ratio = estimate / std::max(stats.query_seconds, 1e-9);
    ratios.push_back(ratio);
    ++timed;
    within += ratio >= 0.1 && ratio <= 10.0;
  }
  std::sort(ratios.begin(), ratios.end());
  const double share = within / double(timed);
  return pass_if(unsound == 0 && share >= 0.8,
                 "pair bound held on " + std::to_string(draws - unsound) + "/" +
                     std::to_string(draws) + " draws" + (unsound ? " (" + first + ")" : "") +
                     "; runtime estimate within 10x on " + fmt("%.0f", 100 * share) +
                     "% of instances (estimate/measured median " +
                     fmt("%.2f", ratios[ratios.size() / 2]) + ", range " +
                     fmt("%.2f", ratios.front()) + ".." + fmt("%.2f", ratios.back()) + ")");
}

// ---------------------------------------------------------------- supervised

// Pairs sharing at least one word token, counted without materializing them.
std::uint64_t token_blocking_pairs(const std::vector<std::string>& a,
                                   const std::vector<std::string>& b) {
  auto vocab = build_vocabulary(Tokenizer::kWord, a, b);
  TokenSetModelConfig model{Tokenizer::kWord, Weighting::kBinary, 1};
  auto qa = encode_collection(a, vocab, model);
  auto qb = encode_collection(b, vocab, model);
  std::vector<std::vector<std::uint32_t>> lists(vocab.size());
  for (std::uint32_t t = 0; t < qb.sets.size(); ++t) {
    for (const auto& tok : qb.sets[t].tokens) lists[tok.rank].push_back(t);
  }
  std::vector<std::uint32_t> seen(qb.sets.size(), ~0u);
  std::uint64_t total = 0;
  for (std::uint32_t q = 0; q < qa.sets.size(); ++q) {
    for (const auto& tok : qa.sets[q].tokens) {
      for (std::uint32_t t : lists[tok.rank]) {
        if (seen[t] != q) {
          seen[t] = q;
          ++total;
        }
      }
    }
  }
  return total;
}

CheckResult supervised_recall() {
  std::mt19937_64 rng(808);
  const std::size_t n = 5000;
  fx::ZipfWords words(20000, 1.0);
  std::uniform_int_distribution<std::size_t> len(5, 12);
  auto planted = fx::planted_data(rng, 2000, 20000, 5, 12, 0.25);
  std::vector<std::string> a = planted.left, b = planted.right;
  while (a.size() < n) a.push_back(words.record(rng, len(rng)));
  while (b.size() < n) b.push_back(words.record(rng, len(rng)));
  std::vector<std::uint32_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0u);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::string> shuffled(n);
  for (std::size_t i = 0; i < n; ++i) shuffled[perm[i]] = b[i];
  std::vector<KnownMatch> train, test;
  for (std::uint32_t i = 0; i < 2000; ++i) (i % 2 ? test : train).push_back({i, perm[i]});

  BlockerOptions o;
  o.seed = 8;
  auto r = block_supervised(a, shuffled, train, recall_target_objective(0.9), o);
  std::set<std::pair<std::uint32_t, std::uint32_t>> got;
  for (const auto& p : r.pairs) got.insert({p.query, p.target});
  std::size_t hit = 0;
  for (const auto& m : test) hit += got.count({m.query, m.target});
  const double recall = hit / double(test.size());
  const double k_tilde = r.pairs.size() / double(n);
  const double tb = token_blocking_pairs(a, shuffled) / double(n);
  return pass_if(recall >= 0.85 && tb >= 10.0 * k_tilde,
                 "test recall " + fmt("%.4f", recall) + ", k~ " + fmt("%.3f", k_tilde) +
                     " vs token blocking " + fmt("%.1f", tb) + " (" + fmt("%.0f", tb / k_tilde) +
                     "x)");
}

// ---------------------------------------------------------------- scalability

std::pair<std::vector<std::string>, std::vector<std::string>> product_like(std::size_t n,
                                                                           std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto d = fx::planted_data(rng, n, n / 2, 4, 12, 0.2);
  std::shuffle(d.right.begin(), d.right.end(), rng);
  return {std::move(d.left), std::move(d.right)};
}

CheckResult scalability() {
  const char* env = std::getenv("SHALLOWBLOCK_SCALE_N");
  const std::size_t n = env ? std::strtoull(env, nullptr, 10) : 100'000;
  double t[2];
  std::size_t pairs[2];
  for (int s = 0; s < 2; ++s) {
    auto [a, b] = product_like(n << s, 909);
    const auto start = std::chrono::steady_clock::now();
    auto r = block_unsupervised(a, b, {10, 1.0}, BlockerOptions{});
    t[s] = seconds_since(start);
    pairs[s] = r.pairs.size();
  }
  const long rss = peak_rss_kb();
  const double ratio = t[1] / t[0];
  const bool ok = t[0] < 600.0 && ratio < 3.5 && (rss < 0 || rss < 8L * 1024 * 1024);
  return pass_if(ok, std::to_string(n) + " per side: " + fmt("%.1f", t[0]) + " s, " +
                         std::to_string(pairs[0]) + " pairs; " + std::to_string(2 * n) +
                         " per side: " + fmt("%.1f", t[1]) + " s; ratio " + fmt("%.2f", ratio) +
                         "; peak RSS " + fmt("%.2f", rss / 1048576.0) + " GiB; " +
                         std::to_string(std::thread::hardware_concurrency()) + " hardware threads");
}

// ---------------------------------------------------------------- real data

CheckResult magellan() {
  const char* dir = std::getenv("SHALLOWBLOCK_DBLP_ACM_DIR");
  if (!dir) return {Verdict::kSkip, "set SHALLOWBLOCK_DBLP_ACM_DIR to the DBLP-ACM CSV folder"};
  namespace fs = std::filesystem;
  const fs::path root(dir);
  if (!fs::exists(root / "tableA.csv") || !fs::exists(root / "tableB.csv")) {
    return {Verdict::kSkip, "no tableA.csv / tableB.csv under " + root.string()};
  }
  auto left = ingest_csv((root / "tableA.csv").string(), "id");
  auto right = ingest_csv((root / "tableB.csv").string(), "id");
  std::set<std::pair<std::uint32_t, std::uint32_t>> gold;
  for (const char* split : {"train.csv", "valid.csv", "test.csv"}) {
    if (!fs::exists(root / split)) continue;
    auto rows = read_csv_file((root / split).string());
    if (rows.empty()) continue;
    const auto& h = rows[0];
    auto col = [&](const std::string& name) {
      return std::size_t(std::find(h.begin(), h.end(), name) - h.begin());
    };
    const std::size_t l = col("ltable_id"), r = col("rtable_id"), y = col("label");
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (y < rows[i].size() && rows[i][y] == "1") {
        auto li = left.find(rows[i][l]);
        auto ri = right.find(rows[i][r]);
        if (li && ri) gold.insert({*li, *ri});
      }
    }
  }
  if (gold.empty()) return {Verdict::kSkip, "no labelled matches found"};
  auto r = block_unsupervised(left.texts, right.texts, {10, 1.0}, BlockerOptions{});
  std::size_t hit = 0;
  for (const auto& p : r.pairs) hit += gold.count({p.query, p.target});
  const double recall = hit / double(gold.size());
  const double k_tilde = r.pairs.size() / double(std::min(left.size(), right.size()));
  return pass_if(recall >= 0.99 && k_tilde <= 6.0,
                 "DBLP-ACM recall " + fmt("%.4f", recall) + ", k~ " + fmt("%.2f", k_tilde));
}

struct Criterion {
  int id;
  const char* name;
  std::function<CheckResult()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "oracle equivalence", oracle_equivalence},
      {2, "worked example", worked_example},
      {3, "filter safety", filter_safety},
      {4, "budget guarantee", budget_guarantee},
      {5, "balance property", balance_property},
      {6, "approximation guarantee", approximation_guarantee},
      {7, "estimator soundness", estimator_soundness},
      {8, "supervised recall", supervised_recall},
      {9, "scalability", scalability},
      {10, "DBLP-ACM recall", magellan},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  int failures = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    CheckResult o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Verdict::kFail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.verdict == Verdict::kPass ? "PASS" : o.verdict == Verdict::kSkip ? "SKIP" : "FAIL";
    failures += o.verdict == Verdict::kFail;
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", tag, c.id, c.name, o.detail.c_str(),
                seconds_since(start));
    std::fflush(stdout);
  }
  return failures ? 1 : 0;
}
