// shallowblock: CSV-in, CSV-out blocking and evaluation.

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "shallowblock/blocker.hpp"
#include "shallowblock/errors.hpp"
#include "shallowblock/join.hpp"
#include "shallowblock/pps_index.hpp"
#include "shallowblock/records.hpp"

namespace sb = shallowblock;

namespace {

constexpr int kUsageError = 1;
constexpr int kDataError = 2;

struct TableArgs {
  std::string left;
  std::string right;
  std::string input;  // dedup
  std::string id_column = "id";
  std::vector<std::string> columns;
};

struct RunArgs {
  std::string output;
  std::string report;
  std::string test_matches;
  std::uint64_t seed = 0;
  int threads = 0;
};

std::uint64_t parse_count(const std::string& text, const char* flag) {
  if (text == "inf") return sb::kUnbounded;
  try {
    std::size_t used = 0;
    long long v = std::stoll(text, &used);
    if (used == text.size() && v >= 0) return static_cast<std::uint64_t>(v);
  } catch (const std::exception&) {
  }
  throw sb::ConfigError(std::string(flag) + " expects a non-negative integer or 'inf'");
}

void add_tables(CLI::App* cmd, TableArgs& t, bool dedup) {
  if (dedup) {
    cmd->add_option("--input", t.input, "Records CSV")->required()->check(CLI::ExistingFile);
  } else {
    cmd->add_option("--left", t.left, "Left records CSV (A)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--right", t.right, "Right records CSV (B)")->required()->check(CLI::ExistingFile);
  }
  cmd->add_option("--id-column", t.id_column, "Id column name")->capture_default_str();
  cmd->add_option("--columns", t.columns, "Text columns (default: all but the id)")->delimiter(',');
}

void add_run(CLI::App* cmd, RunArgs& r) {
  cmd->add_option("--output,-o", r.output, "Pairs CSV to write")->required();
  cmd->add_option("--report", r.report, "Write the run report as JSON");
  cmd->add_option("--test-matches", r.test_matches, "Gold matches for the printed recall")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", r.seed, "Random seed")->capture_default_str();
  cmd->add_option("--threads", r.threads, "Worker threads (0: all available)")
      ->capture_default_str();
}

struct Tables {
  sb::RecordTable left;
  sb::RecordTable right;
  bool dedup = false;
  const sb::RecordTable& right_or_left() const { return dedup ? left : right; }
};

Tables load(const TableArgs& t) {
  Tables out;
  if (!t.input.empty()) {
    out.dedup = true;
    out.left = sb::ingest_csv(t.input, t.id_column, t.columns);
  } else {
    out.left = sb::ingest_csv(t.left, t.id_column, t.columns);
    out.right = sb::ingest_csv(t.right, t.id_column, t.columns);
  }
  return out;
}

void finish(const Tables& tables, const sb::PairSet& pairs, const RunArgs& run,
            const std::string& metadata, double seconds) {
  sb::write_pairs(pairs, tables.left, tables.right_or_left(), run.output);
  if (!run.report.empty()) {
    std::ofstream out(run.report);
    if (!out) throw sb::DataError("cannot write '" + run.report + "'");
    out << metadata << '\n';
  }
  // Recomputed from the written file so the printed figures match `evaluate`.
  std::vector<sb::IdPair> gold;
  if (!run.test_matches.empty()) gold = sb::read_id_pairs(run.test_matches);
  sb::EvalReport report = sb::evaluate_pairs(sb::read_id_pairs(run.output), gold,
                                             tables.left, tables.right_or_left(), tables.dedup);
  report.has_gold = !run.test_matches.empty();
  report.seconds = seconds;
  report.peak_rss_kb = sb::peak_rss_kb();
  report.metadata = metadata;
  if (report.excluded_gold > 0) {
    std::cerr << "warning: " << report.excluded_gold
              << " gold matches reference unknown ids and were excluded\n";
  }
  std::cout << report.to_text();
}

void warn(const sb::RunReport& report) {
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
}

sb::BlockerOptions blocker_options(const RunArgs& run) {
  sb::BlockerOptions o;
  o.seed = run.seed;
  o.threads = run.threads;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Set similarity join based blocking for entity resolution"};
  app.require_subcommand(1);

  TableArgs tables;
  RunArgs run;

  // block
  auto* block = app.add_subcommand("block", "Unsupervised blocking of two tables");
  std::uint64_t k = 10;
  double quality = 1.0;
  add_tables(block, tables, false);
  add_run(block, run);
  block->add_option("--k", k, "Pair budget: |P| <= k * min(|A|, |B|)")->capture_default_str();
  block->add_option("--quality", quality, "Approximation quality q in (0, 1]")
      ->capture_default_str();

  // block-supervised
  auto* supervised = app.add_subcommand("block-supervised", "Blocking tuned on known matches");
  std::string train_matches;
  std::optional<double> recall_target;
  std::string objective = "recall-target";
  std::optional<double> c_k;
  double c_rt = 0.01;
  add_tables(supervised, tables, false);
  add_run(supervised, run);
  supervised->add_option("--train-matches", train_matches, "Known matches (left_id,right_id)")
      ->required()
      ->check(CLI::ExistingFile);
  supervised->add_option("--objective", objective, "recall-target or linear")
      ->check(CLI::IsMember({"recall-target", "linear"}))
      ->capture_default_str();
  supervised->add_option("--recall-target", recall_target, "Recall target R");
  supervised->add_option("--ck", c_k, "Linear objective weight of k~");
  supervised->add_option("--crt", c_rt, "Weight of the estimated runtime in seconds")
      ->capture_default_str();

  // dedup
  auto* dedup = app.add_subcommand("dedup", "Find duplicates within one table");
  add_tables(dedup, tables, true);
  add_run(dedup, run);
  dedup->add_option("--k", k, "Pair budget: |P| <= k * |A|")->capture_default_str();
  dedup->add_option("--quality", quality, "Approximation quality q in (0, 1]")
      ->capture_default_str();
  dedup->add_option("--train-matches", train_matches, "Known duplicates: tune on them")
      ->check(CLI::ExistingFile);
  dedup->add_option("--objective", objective, "recall-target or linear")
      ->check(CLI::IsMember({"recall-target", "linear"}))
      ->capture_default_str();
  dedup->add_option("--recall-target", recall_target, "Recall target R");
  dedup->add_option("--ck", c_k, "Linear objective weight of k~");
  dedup->add_option("--crt", c_rt, "Weight of the estimated runtime in seconds")
      ->capture_default_str();

  // join
  auto* join = app.add_subcommand("join", "Raw (tau, tau_r, k)-join of left against right");
  double tau = 0.0;
  double tau_r = 0.0;
  std::string top_k = "inf";
  std::string rho = "inf";
  std::string measure = "jaccard";
  std::string tokenizer = "word";
  std::string weighting = "tfidf";
  add_tables(join, tables, false);
  add_run(join, run);
  join->add_option("--tau", tau, "Absolute threshold")->capture_default_str();
  join->add_option("--tau-r", tau_r, "Relative threshold")->capture_default_str();
  join->add_option("--top-k", top_k, "Pairs per left record, or inf")->capture_default_str();
  join->add_option("--rho", rho, "Traversal rank cutoff, or inf")->capture_default_str();
  join->add_option("--measure", measure, "jaccard, dice, cosine or overlap")
      ->check(CLI::IsMember({"jaccard", "dice", "cosine", "overlap"}))
      ->capture_default_str();
  join->add_option("--tokenizer", tokenizer, "word or 3gram")
      ->check(CLI::IsMember({"word", "3gram"}))
      ->capture_default_str();
  join->add_option("--weighting", weighting, "binary or tfidf")
      ->check(CLI::IsMember({"binary", "tfidf"}))
      ->capture_default_str();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Recall and k~ of a pairs file");
  std::string pairs_path;
  std::string gold_path;
  TableArgs eval_tables;
  evaluate->add_option("--pairs", pairs_path, "Pairs CSV")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--gold", gold_path, "Gold matches CSV")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--left", eval_tables.left, "Left records CSV")->check(CLI::ExistingFile);
  evaluate->add_option("--right", eval_tables.right, "Right records CSV")->check(CLI::ExistingFile);
  evaluate->add_option("--input", eval_tables.input, "Records CSV of a dedup run")
      ->check(CLI::ExistingFile);
  evaluate->add_option("--id-column", eval_tables.id_column, "Id column name")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    const auto start = std::chrono::steady_clock::now();
    auto seconds = [&] {
      return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };

    auto make_objective = [&](CLI::App* cmd) {
      const bool linear = objective == "linear";
      if (linear && recall_target) {
        throw sb::ConfigError("--recall-target conflicts with --objective linear");
      }
      if (!linear && c_k) throw sb::ConfigError("--ck needs --objective linear");
      if (linear) {
        if (!c_k) throw sb::ConfigError("--objective linear needs --ck");
        return sb::linear_objective(*c_k, c_rt);
      }
      if (!recall_target) {
        throw sb::ConfigError(cmd->get_name() + " needs --recall-target or --objective linear");
      }
      return sb::recall_target_objective(*recall_target, c_rt);
    };

    if (block->parsed()) {
      Tables t = load(tables);
      sb::BlockerBudget budget{k, quality};
      auto result = sb::block_unsupervised(t.left.texts, t.right.texts, budget,
                                           blocker_options(run));
      warn(result.report);
      finish(t, result.pairs, run, result.report.to_json(-1), seconds());
    } else if (supervised->parsed()) {
      sb::Objective f = make_objective(supervised);
      Tables t = load(tables);
      auto matches = sb::resolve_matches(sb::read_id_pairs(train_matches), t.left, t.right);
      auto result = sb::block_supervised(t.left.texts, t.right.texts, matches, f,
                                         blocker_options(run));
      warn(result.report);
      finish(t, result.pairs, run, result.report.to_json(-1), seconds());
    } else if (dedup->parsed()) {
      Tables t = load(tables);
      sb::BlockResult result;
      if (!train_matches.empty()) {
        if (dedup->count("--k") || dedup->count("--quality")) {
          throw sb::ConfigError("--k and --quality do not apply with --train-matches");
        }
        sb::Objective f = make_objective(dedup);
        auto matches = sb::resolve_matches(sb::read_id_pairs(train_matches), t.left, t.left);
        result = sb::block_dedup_supervised(t.left.texts, matches, f, blocker_options(run));
      } else {
        if (recall_target || c_k || dedup->count("--objective")) {
          throw sb::ConfigError("objective flags need --train-matches");
        }
        sb::BlockerBudget budget{k, quality};
        result = sb::block_dedup_unsupervised(t.left.texts, budget, blocker_options(run));
      }
      warn(result.report);
      finish(t, result.pairs, run, result.report.to_json(-1), seconds());
    } else if (join->parsed()) {
      sb::JoinParams params;
      params.measure = sb::parse_measure(measure);
      params.tau = tau;
      params.tau_r = tau_r;
      params.k = parse_count(top_k, "--top-k");
      params.max_rank = parse_count(rho, "--rho");
      sb::validate_params(params);
      Tables t = load(tables);
      sb::TokenSetModelConfig model{sb::parse_tokenizer(tokenizer), sb::parse_weighting(weighting),
                                    sb::norm_of(params.measure)};
      auto vocab = sb::build_vocabulary(model.tokenizer, t.left.texts, t.right.texts);
      auto queries = sb::encode_collection(t.left.texts, vocab, model);
      auto targets = std::make_shared<const sb::TokenSetCollection>(
          sb::encode_collection(t.right.texts, vocab, model));
      sb::IndexOptions io;
      io.threads = run.threads;
      const double tau_build = params.max_rank == sb::kUnbounded ? params.tau : 0.0;
      auto index = sb::build_pps_index(targets, tau_build, params.measure, io);
      sb::JoinStats stats;
      sb::JoinOptions jo;
      jo.threads = run.threads;
      jo.stats = &stats;
      auto pairs = sb::ttrk_join(queries, index, params, jo);
      auto inf_or = [](std::uint64_t v) -> nlohmann::json {
        if (v == sb::kUnbounded) return "inf";
        return v;
      };
      nlohmann::json meta{{"mode", "join"},
                          {"config", model.name() + "/" + measure},
                          {"tau", tau},
                          {"tau_r", tau_r},
                          {"k", inf_or(params.k)},
                          {"max_rank", inf_or(params.max_rank)},
                          {"pre_candidates", stats.pre_candidates},
                          {"candidates", stats.candidates}};
      const std::string metadata = meta.dump();
      finish(t, pairs, run, metadata, seconds());
    } else if (evaluate->parsed()) {
      Tables t;
      if (!eval_tables.input.empty()) {
        if (!eval_tables.left.empty() || !eval_tables.right.empty()) {
          throw sb::ConfigError("--input conflicts with --left/--right");
        }
      } else if (eval_tables.left.empty() || eval_tables.right.empty()) {
        throw sb::ConfigError("evaluate needs --left and --right, or --input");
      }
      t = load(eval_tables);
      auto report = sb::evaluate_pairs(sb::read_id_pairs(pairs_path), sb::read_id_pairs(gold_path),
                                       t.left, t.right_or_left(), t.dedup);
      if (report.excluded_gold > 0) {
        std::cerr << "warning: " << report.excluded_gold
                  << " gold matches reference unknown ids and were excluded\n";
      }
      std::cout << report.to_text();
    }
  } catch (const sb::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const sb::DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  }
  return 0;
}
