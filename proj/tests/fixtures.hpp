#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "shallowblock/join.hpp"
#include "shallowblock/pps_index.hpp"
#include "shallowblock/similarity.hpp"
#include "shallowblock/tokenset.hpp"

namespace shallowblock::fx {

inline constexpr Measure kMeasures[] = {Measure::kJaccard, Measure::kDice, Measure::kCosine,
                                        Measure::kOverlap};

// Records of 1..max_len words drawn uniformly from "t0".."t{vocab-1}".
inline std::vector<std::string> random_records(std::mt19937_64& rng, std::size_t n,
                                               std::size_t vocab, std::size_t max_len) {
  std::uniform_int_distribution<std::size_t> len(1, max_len);
  std::uniform_int_distribution<std::size_t> tok(0, vocab - 1);
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::string s;
    for (std::size_t j = len(rng); j > 0; --j) {
      if (!s.empty()) s += ' ';
      s += "t" + std::to_string(tok(rng));
    }
    out.push_back(std::move(s));
  }
  return out;
}

// Zipf-distributed token draws over `vocab` words with exponent `skew`.
class ZipfWords {
 public:
  ZipfWords(std::size_t vocab, double skew) {
    std::vector<double> w(vocab);
    for (std::size_t i = 0; i < vocab; ++i) w[i] = 1.0 / std::pow(double(i + 1), skew);
    dist_ = std::discrete_distribution<std::size_t>(w.begin(), w.end());
  }
  std::string draw(std::mt19937_64& rng) { return "w" + std::to_string(dist_(rng)); }
  std::string record(std::mt19937_64& rng, std::size_t len) {
    std::string s;
    for (std::size_t j = 0; j < len; ++j) {
      if (j) s += ' ';
      s += draw(rng);
    }
    return s;
  }

 private:
  std::discrete_distribution<std::size_t> dist_;
};

// Left records plus right records that copy each left record with a few
// tokens replaced or dropped; right[i] is the planted match of left[i].
struct PlantedData {
  std::vector<std::string> left;
  std::vector<std::string> right;
};

inline PlantedData planted_data(std::mt19937_64& rng, std::size_t n, std::size_t vocab,
                                std::size_t min_len, std::size_t max_len, double corrupt) {
  ZipfWords words(vocab, 1.0);
  std::uniform_int_distribution<std::size_t> len(min_len, max_len);
  std::bernoulli_distribution flip(corrupt);
  std::bernoulli_distribution drop(0.5);
  PlantedData d;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::string> toks;
    for (std::size_t j = len(rng); j > 0; --j) toks.push_back(words.draw(rng));
    std::string l;
    std::string r;
    for (const auto& t : toks) {
      if (!l.empty()) l += ' ';
      l += t;
      if (flip(rng)) {
        if (drop(rng)) continue;
        if (!r.empty()) r += ' ';
        r += words.draw(rng);
      } else {
        if (!r.empty()) r += ' ';
        r += t;
      }
    }
    d.left.push_back(std::move(l));
    d.right.push_back(std::move(r));
  }
  return d;
}

struct Encoded {
  TokenSetCollection queries;
  std::shared_ptr<const TokenSetCollection> targets;
};

inline Encoded encode_pair(const std::vector<std::string>& a, const std::vector<std::string>& b,
                           Measure measure, Weighting weighting,
                           Tokenizer tokenizer = Tokenizer::kWord) {
  TokenSetModelConfig model{tokenizer, weighting, norm_of(measure)};
  auto vocab = build_vocabulary(tokenizer, a, b);
  Encoded e;
  e.queries = encode_collection(a, vocab, model);
  e.targets = std::make_shared<const TokenSetCollection>(encode_collection(b, vocab, model));
  return e;
}

inline double max_norm_size(const TokenSetCollection& c) {
  double m = 0.0;
  for (const auto& s : c.sets) m = std::max(m, s.norm_size);
  return m;
}

// Random params with unbounded rank cutoff; tau scaled to the measure's range.
inline JoinParams random_params(std::mt19937_64& rng, Measure measure, double overlap_cap) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::uint64_t> kdist(1, 10);
  JoinParams p;
  p.measure = measure;
  p.tau = unit(rng) * (is_normalized(measure) ? 1.0 : overlap_cap);
  p.tau_r = unit(rng);
  p.k = kdist(rng);
  return p;
}

// Pair sets equal with scores within 1e-9.
inline bool same_pairs(const PairSet& a, const PairSet& b, std::string* why = nullptr) {
  if (a.size() != b.size()) {
    if (why) *why = "sizes " + std::to_string(a.size()) + " vs " + std::to_string(b.size());
    return false;
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].query != b[i].query || a[i].target != b[i].target ||
        std::abs(a[i].score - b[i].score) > 1e-9) {
      if (why) {
        *why = "row " + std::to_string(i) + ": (" + std::to_string(a[i].query) + "," +
               std::to_string(a[i].target) + "," + std::to_string(a[i].score) + ") vs (" +
               std::to_string(b[i].query) + "," + std::to_string(b[i].target) + "," +
               std::to_string(b[i].score) + ")";
      }
      return false;
    }
  }
  return true;
}

}  // namespace shallowblock::fx
