#include "shallowblock/similarity.hpp"

#include <string>

#include "shallowblock/errors.hpp"

namespace shallowblock {

std::string_view to_string(Measure measure) {
  switch (measure) {
    case Measure::kJaccard: return "jaccard";
    case Measure::kDice: return "dice";
    case Measure::kCosine: return "cosine";
    case Measure::kOverlap: return "overlap";
  }
  return "unknown";
}

Measure parse_measure(std::string_view name) {
  if (name == "jaccard") return Measure::kJaccard;
  if (name == "dice") return Measure::kDice;
  if (name == "cosine") return Measure::kCosine;
  if (name == "overlap") return Measure::kOverlap;
  throw ConfigError("unknown similarity measure '" + std::string(name) + "'");
}

void validate_threshold(Measure measure, double tau) {
  if (!(tau >= 0.0)) {
    throw ConfigError("similarity threshold must be non-negative");
  }
  if (is_normalized(measure) && tau > 1.0 + kEps) {
    throw ConfigError("threshold " + std::to_string(tau) + " is out of range for " +
                      std::string(to_string(measure)));
  }
}

OverlapStats overlap_stats(const WeightedTokenSet& a,
                           const WeightedTokenSet& b) {
  OverlapStats stats;
  stats.size_a = a.norm_size;
  stats.size_b = b.norm_size;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.tokens.size() && j < b.tokens.size()) {
    const WeightedToken& x = a.tokens[i];
    const WeightedToken& y = b.tokens[j];
    if (x.rank < y.rank) {
      ++i;
    } else if (y.rank < x.rank) {
      ++j;
    } else {
      stats.intersection += x.weight < y.weight ? x.weight : y.weight;
      stats.dot_product += x.weight * y.weight;
      ++i;
      ++j;
    }
  }
  stats.union_weight = stats.size_a + stats.size_b - stats.intersection;
  return stats;
}

double similarity(Measure measure, const OverlapStats& stats) {
  switch (measure) {
    case Measure::kJaccard:
      return stats.union_weight > 0.0 ? stats.intersection / stats.union_weight
                                      : 0.0;
    case Measure::kDice: {
      double total = stats.size_a + stats.size_b;
      return total > 0.0 ? 2.0 * stats.intersection / total : 0.0;
    }
    case Measure::kCosine:
      return stats.dot_product;
    case Measure::kOverlap:
      return stats.intersection;
  }
  return 0.0;
}

double suffix_bound_sigma(Measure measure, double size, double tau) {
  validate_threshold(measure, tau);
  switch (measure) {
    case Measure::kJaccard: return tau * size;
    case Measure::kDice: return tau * size / (2.0 - tau);
    case Measure::kCosine: return tau * tau;
    case Measure::kOverlap: return tau;
  }
  return 0.0;
}

SuffixBounds index_suffix_bounds(Measure measure, double size_a,
                                 double prefix_a, double suffix_a,
                                 double min_prefix_b, double tau) {
  if (tau <= 0.0) return {};
  switch (measure) {
    case Measure::kJaccard:
      return {tau * (size_a + min_prefix_b),
              suffix_a / tau - prefix_a - min_prefix_b};
    case Measure::kDice:
      return {tau / (2.0 - tau) * (size_a + min_prefix_b),
              (2.0 - tau) / tau * suffix_a - prefix_a - min_prefix_b};
    case Measure::kCosine:
      return {suffix_a > 0.0 ? tau * tau / suffix_a : kInf, kInf};
    case Measure::kOverlap:
      return {tau, kInf};
  }
  return {};
}

double equivalent_overlap(Measure measure, double size_a, double size_b,
                          double tau) {
  switch (measure) {
    case Measure::kJaccard: return tau / (tau + 1.0) * (size_a + size_b);
    case Measure::kDice: return tau / 2.0 * (size_a + size_b);
    case Measure::kCosine: return tau;
    case Measure::kOverlap: return tau;
  }
  return 0.0;
}

}  // namespace shallowblock
