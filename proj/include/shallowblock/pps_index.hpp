#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "shallowblock/similarity.hpp"
#include "shallowblock/tokenset.hpp"

namespace shallowblock {

struct IndexEntry {
  std::uint32_t set;       // id of the indexed set
  std::uint32_t position;  // 0-based position of the token inside the set
  double suffix;           // l-norm weight of the set from `position` onwards
};

struct PostingList {
  std::span<const IndexEntry> entries;  // sorted by (suffix, set)
  double min_prefix = kInf;             // smallest prefix weight of any entry
};

struct IndexOptions {
  // Split every token list by mean prefix weight. When false each token gets a
  // single suffix-sorted list, exposed as the "below" list.
  bool partition = true;
  int threads = 0;  // 0 = all available
};

// Prefix-partitioned, suffix-sorted inverted index over a token set
// collection. Immutable once built and safe to share between threads.
class PpsIndex {
 public:
  PpsIndex() = default;

  Measure measure() const { return measure_; }
  double tau_build() const { return tau_build_; }
  bool partitioned() const { return partitioned_; }
  double max_set_size() const { return max_set_size_; }
  const TokenSetCollection& collection() const { return *collection_; }
  const std::shared_ptr<const TokenSetCollection>& shared_collection() const {
    return collection_;
  }

  // Number of token slots (largest indexed rank + 1).
  std::size_t num_tokens() const { return min_prefix_.size() / 2; }
  std::size_t num_entries() const { return entries_.size(); }

  // Entries whose prefix weight is below the token's mean prefix weight.
  PostingList below(TokenRank token) const { return list(token, 0); }
  // Entries at or above the mean prefix weight.
  PostingList above(TokenRank token) const { return list(token, 1); }
  // Total length of both lists of a token.
  std::size_t list_size(TokenRank token) const {
    if (token >= num_tokens()) return 0;
    return offsets_[2 * token + 2] - offsets_[2 * token];
  }

 private:
  friend PpsIndex build_pps_index(std::shared_ptr<const TokenSetCollection>,
                                  double, Measure, const IndexOptions&);

  PostingList list(TokenRank token, int side) const {
    if (token >= num_tokens()) return {};
    std::size_t slot = 2 * static_cast<std::size_t>(token) + side;
    return {std::span<const IndexEntry>(entries_.data() + offsets_[slot],
                                        offsets_[slot + 1] - offsets_[slot]),
            min_prefix_[slot]};
  }

  Measure measure_ = Measure::kJaccard;
  double tau_build_ = 0.0;
  bool partitioned_ = true;
  double max_set_size_ = 0.0;
  std::shared_ptr<const TokenSetCollection> collection_ =
      std::make_shared<const TokenSetCollection>();
  std::vector<IndexEntry> entries_;
  std::vector<std::size_t> offsets_{0};  // 2 * num_tokens + 1
  std::vector<double> min_prefix_;       // 2 * num_tokens
};

// Indexes, for every set, the shortest prefix whose remaining suffix weight
// still reaches the query suffix bound at `tau_build`. A join against this
// index is complete for any threshold >= tau_build.
PpsIndex build_pps_index(std::shared_ptr<const TokenSetCollection> collection,
                         double tau_build, Measure measure,
                         const IndexOptions& options = {});

struct CropRange {
  std::size_t begin = 0;  // first admissible entry
  std::size_t end = 0;    // one past the last admissible entry
  std::size_t skipped_before = 0;
  std::size_t skipped_after = 0;
};

// Binary searches a suffix-sorted list for the entries with
// lower - kEps <= suffix <= upper + kEps.
CropRange crop_list(std::span<const IndexEntry> list, double lower,
                    double upper);

}  // namespace shallowblock
