#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "shallowblock/blocker.hpp"
#include "shallowblock/errors.hpp"
#include "shallowblock/join.hpp"
#include "shallowblock/pps_index.hpp"
#include "shallowblock/tokenset.hpp"

namespace py = pybind11;
namespace sb = shallowblock;

namespace {

using PairTuple = std::tuple<std::uint32_t, std::uint32_t, double>;

std::vector<PairTuple> to_tuples(const sb::PairSet& pairs) {
  std::vector<PairTuple> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.emplace_back(p.query, p.target, p.score);
  return out;
}

sb::PairSet from_tuples(const std::vector<PairTuple>& pairs) {
  sb::PairSet out;
  for (const auto& [q, t, s] : pairs) out.push_back({q, t, s});
  return out;
}

std::uint64_t count_arg(const std::optional<std::uint64_t>& v) {
  return v ? *v : sb::kUnbounded;
}

std::vector<sb::KnownMatch> to_matches(const std::vector<std::pair<std::uint32_t, std::uint32_t>>& m) {
  std::vector<sb::KnownMatch> out;
  for (const auto& [a, b] : m) out.push_back({a, b});
  return out;
}

sb::Objective make_objective(std::optional<double> recall_target, std::optional<double> c_k,
                             double c_rt) {
  if (recall_target && c_k) throw sb::ConfigError("give recall_target or c_k, not both");
  if (c_k) return sb::linear_objective(*c_k, c_rt);
  if (!recall_target) throw sb::ConfigError("give recall_target or c_k");
  return sb::recall_target_objective(*recall_target, c_rt);
}

sb::BlockerOptions options(std::uint64_t seed, int threads) {
  sb::BlockerOptions o;
  o.seed = seed;
  o.threads = threads;
  return o;
}

// (left, right, tau, tau_r, k, max_rank) join on freshly encoded strings.
std::vector<PairTuple> join_strings(const std::vector<std::string>& left,
                                    const std::vector<std::string>& right, double tau,
                                    double tau_r, std::optional<std::uint64_t> k,
                                    std::optional<std::uint64_t> max_rank,
                                    const std::string& measure, const std::string& tokenizer,
                                    const std::string& weighting, bool naive, int threads) {
  sb::JoinParams params;
  params.measure = sb::parse_measure(measure);
  params.tau = tau;
  params.tau_r = tau_r;
  params.k = count_arg(k);
  params.max_rank = count_arg(max_rank);
  sb::validate_params(params);
  sb::TokenSetModelConfig model{sb::parse_tokenizer(tokenizer), sb::parse_weighting(weighting),
                                sb::norm_of(params.measure)};
  auto vocab = sb::build_vocabulary(model.tokenizer, left, right);
  auto queries = sb::encode_collection(left, vocab, model);
  auto targets = std::make_shared<const sb::TokenSetCollection>(
      sb::encode_collection(right, vocab, model));
  py::gil_scoped_release release;
  if (naive) return to_tuples(sb::naive_join(queries, *targets, params));
  const double tau_build = params.max_rank == sb::kUnbounded ? params.tau : 0.0;
  sb::IndexOptions io;
  io.threads = threads;
  auto index = sb::build_pps_index(targets, tau_build, params.measure, io);
  sb::JoinOptions jo;
  jo.threads = threads;
  return to_tuples(sb::ttrk_join(queries, index, params, jo));
}

py::tuple result_tuple(const sb::BlockResult& r) {
  return py::make_tuple(to_tuples(r.pairs), r.report.to_json());
}

}  // namespace

PYBIND11_MODULE(_shallowblock, m) {
  m.doc() = "Set similarity joins and blocking for entity resolution";

  py::register_exception<sb::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<sb::DataError>(m, "DataError", PyExc_RuntimeError);

  m.def("tokenize",
        [](const std::string& text, const std::string& tokenizer) {
          return sb::tokenize(sb::parse_tokenizer(tokenizer), text);
        },
        py::arg("text"), py::arg("tokenizer") = "word");

  m.def("join", [](const std::vector<std::string>& left, const std::vector<std::string>& right,
                   double tau, double tau_r, std::optional<std::uint64_t> k,
                   std::optional<std::uint64_t> max_rank, const std::string& measure,
                   const std::string& tokenizer, const std::string& weighting, int threads) {
          return join_strings(left, right, tau, tau_r, k, max_rank, measure, tokenizer, weighting,
                              false, threads);
        },
        py::arg("left"), py::arg("right"), py::arg("tau") = 0.0, py::arg("tau_r") = 0.0,
        py::arg("k") = py::none(), py::arg("max_rank") = py::none(),
        py::arg("measure") = "jaccard", py::arg("tokenizer") = "word",
        py::arg("weighting") = "tfidf", py::arg("threads") = 0,
        "(tau, tau_r, k)-join; returns (left index, right index, score) tuples.");

  m.def("naive_join", [](const std::vector<std::string>& left, const std::vector<std::string>& right,
                         double tau, double tau_r, std::optional<std::uint64_t> k,
                         const std::string& measure, const std::string& tokenizer,
                         const std::string& weighting) {
          return join_strings(left, right, tau, tau_r, k, std::nullopt, measure, tokenizer,
                              weighting, true, 1);
        },
        py::arg("left"), py::arg("right"), py::arg("tau") = 0.0, py::arg("tau_r") = 0.0,
        py::arg("k") = py::none(), py::arg("measure") = "jaccard",
        py::arg("tokenizer") = "word", py::arg("weighting") = "tfidf",
        "Brute-force reference join.");

  m.def("join_quality", [](const std::vector<PairTuple>& exact, const std::vector<PairTuple>& approx,
                           double tau_r, std::size_t num_queries) {
          return sb::join_quality(from_tuples(exact), from_tuples(approx), tau_r, num_queries);
        },
        py::arg("exact"), py::arg("approx"), py::arg("tau_r"), py::arg("num_queries"));

  m.def("discriminatory_power", [](const std::vector<PairTuple>& pairs, std::size_t num_queries,
                                   std::size_t k_dp) {
          return sb::discriminatory_power(from_tuples(pairs), num_queries, k_dp);
        },
        py::arg("pairs"), py::arg("num_queries"), py::arg("k_dp") = 10);

  m.def("block", [](const std::vector<std::string>& a, const std::vector<std::string>& b,
                    std::uint64_t k, double q, std::uint64_t seed, int threads) {
          py::gil_scoped_release release;
          return sb::block_unsupervised(a, b, {k, q}, options(seed, threads));
        },
        py::arg("a"), py::arg("b"), py::arg("k") = 10, py::arg("q") = 1.0,
        py::arg("seed") = 0, py::arg("threads") = 0);

  m.def("block_supervised",
        [](const std::vector<std::string>& a, const std::vector<std::string>& b,
           const std::vector<std::pair<std::uint32_t, std::uint32_t>>& matches,
           std::optional<double> recall_target, std::optional<double> c_k, double c_rt,
           std::uint64_t seed, int threads) {
          auto f = make_objective(recall_target, c_k, c_rt);
          auto known = to_matches(matches);
          py::gil_scoped_release release;
          return sb::block_supervised(a, b, known, f, options(seed, threads));
        },
        py::arg("a"), py::arg("b"), py::arg("matches"), py::arg("recall_target") = py::none(),
        py::arg("c_k") = py::none(), py::arg("c_rt") = 0.01, py::arg("seed") = 0,
        py::arg("threads") = 0);

  m.def("dedup", [](const std::vector<std::string>& a, std::uint64_t k, double q,
                    std::uint64_t seed, int threads) {
          py::gil_scoped_release release;
          return sb::block_dedup_unsupervised(a, {k, q}, options(seed, threads));
        },
        py::arg("a"), py::arg("k") = 10, py::arg("q") = 1.0, py::arg("seed") = 0,
        py::arg("threads") = 0);

  py::class_<sb::BlockResult>(m, "BlockResult")
      .def_property_readonly("pairs", [](const sb::BlockResult& r) { return to_tuples(r.pairs); })
      .def_property_readonly("report", [](const sb::BlockResult& r) { return r.report.to_json(); })
      .def_property_readonly("warnings", [](const sb::BlockResult& r) { return r.report.warnings; })
      .def("__iter__", [](const sb::BlockResult& r) { return py::iter(result_tuple(r)); });
}
