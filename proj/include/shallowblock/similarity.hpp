#pragma once

#include <cmath>
#include <limits>
#include <string_view>

#include "shallowblock/tokenset.hpp"

namespace shallowblock {

// Slack applied at every bound comparison ("value >= bound - kEps") so that
// rounding never drops a qualifying pair.
inline constexpr double kEps = 1e-9;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Measure { kJaccard, kDice, kCosine, kOverlap };

std::string_view to_string(Measure measure);
Measure parse_measure(std::string_view name);

// l in the l-norm sizes: 2 for Cosine, 1 otherwise.
constexpr int norm_of(Measure measure) {
  return measure == Measure::kCosine ? 2 : 1;
}
constexpr bool is_normalized(Measure measure) {
  return measure != Measure::kOverlap;
}

// Throws ConfigError unless tau >= 0 and, for normalized measures, tau <= 1.
void validate_threshold(Measure measure, double tau);

struct OverlapStats {
  double intersection = 0.0;    // sum of min(a_k, b_k)
  double union_weight = 0.0;    // sum of max(a_k, b_k)
  double dot_product = 0.0;     // sum of a_k * b_k
  double size_a = 0.0;
  double size_b = 0.0;
};

// Full merge of two sets. union_weight is derived as size_a + size_b -
// intersection, which makes the value independent of where accumulation
// starts.
OverlapStats overlap_stats(const WeightedTokenSet& a,
                           const WeightedTokenSet& b);

double similarity(Measure measure, const OverlapStats& stats);

inline double similarity(Measure measure, const WeightedTokenSet& a,
                         const WeightedTokenSet& b) {
  return similarity(measure, overlap_stats(a, b));
}

// Smallest suffix weight a query (or indexed set) of size `size` must still
// hold at its first shared token for a pair to reach `tau`.
double suffix_bound_sigma(Measure measure, double size, double tau);

struct SuffixBounds {
  double lower = 0.0;
  double upper = kInf;
};

// Admissible range of an index entry's suffix weight s_b when the query has
// traversed prefix `prefix_a` and holds suffix `suffix_a`, and every entry of
// the list has a prefix of at least `min_prefix_b`.
SuffixBounds index_suffix_bounds(Measure measure, double size_a,
                                 double prefix_a, double suffix_a,
                                 double min_prefix_b, double tau);

// Minimum overlap (dot product for Cosine) a pair of the given sizes needs to
// reach `tau`.
double equivalent_overlap(Measure measure, double size_a, double size_b,
                          double tau);

// Largest overlap two suffixes with the given l-norm sums can still add.
// min(s_a, s_b) for l = 1; Cauchy-Schwarz sqrt(s_a * s_b) for Cosine.
inline double suffix_overlap_bound(Measure measure, double suffix_a,
                                   double suffix_b) {
  if (measure == Measure::kCosine) {
    double product = suffix_a * suffix_b;
    return product > 0.0 ? std::sqrt(product) : 0.0;
  }
  return suffix_a < suffix_b ? suffix_a : suffix_b;
}

// Highest similarity a query of size `size_a` can reach against a collection
// whose largest set has size `max_size_b`.
inline double similarity_cap(Measure measure, double size_a,
                             double max_size_b) {
  if (is_normalized(measure)) return 1.0;
  return size_a < max_size_b ? size_a : max_size_b;
}

}  // namespace shallowblock
