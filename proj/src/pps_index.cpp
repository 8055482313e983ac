#include "shallowblock/pps_index.hpp"

#include <algorithm>

#include "shallowblock/errors.hpp"
#include "threads.hpp"

namespace shallowblock {

PpsIndex build_pps_index(std::shared_ptr<const TokenSetCollection> collection,
                         double tau_build, Measure measure,
                         const IndexOptions& options) {
  if (!collection) throw ConfigError("index collection is null");
  if (collection->norm() != norm_of(measure)) {
    throw ConfigError("collection norm does not match measure " +
                      std::string(to_string(measure)));
  }
  validate_threshold(measure, tau_build);
  const int norm = collection->norm();
  const auto& sets = collection->sets;

  PpsIndex index;
  index.measure_ = measure;
  index.tau_build_ = tau_build;
  index.partitioned_ = options.partition;

  std::size_t num_tokens = 0;
  for (const auto& b : sets) {
    index.max_set_size_ = std::max(index.max_set_size_, b.norm_size);
    if (!b.empty()) {
      num_tokens = std::max<std::size_t>(num_tokens, b.tokens.back().rank + 1);
    }
  }

  // Number of indexed prefix tokens per set.
  std::vector<std::uint32_t> prefix_length(sets.size(), 0);
  std::vector<std::size_t> token_start(num_tokens + 1, 0);
  for (std::size_t s = 0; s < sets.size(); ++s) {
    const auto& b = sets[s];
    const double sigma = suffix_bound_sigma(measure, b.norm_size, tau_build);
    double prefix = 0.0;
    std::uint32_t j = 0;
    while (j < b.tokens.size() && b.norm_size - prefix >= sigma - kEps) {
      ++token_start[b.tokens[j].rank + 1];
      prefix += norm_weight(b.tokens[j].weight, norm);
      ++j;
    }
    prefix_length[s] = j;
  }
  for (std::size_t t = 0; t < num_tokens; ++t) {
    token_start[t + 1] += token_start[t];
  }

  // Fill with the prefix weight parked in `suffix`; converted below.
  std::vector<IndexEntry> entries(token_start.back());
  std::vector<double> prefix_total(num_tokens, 0.0);
  {
    std::vector<std::size_t> cursor(token_start.begin(), token_start.end() - 1);
    for (std::size_t s = 0; s < sets.size(); ++s) {
      const auto& b = sets[s];
      double prefix = 0.0;
      for (std::uint32_t j = 0; j < prefix_length[s]; ++j) {
        TokenRank t = b.tokens[j].rank;
        entries[cursor[t]++] = {static_cast<std::uint32_t>(s), j, prefix};
        prefix_total[t] += prefix;
        prefix += norm_weight(b.tokens[j].weight, norm);
      }
    }
  }

  std::vector<std::size_t> offsets(2 * num_tokens + 1, 0);
  std::vector<double> min_prefix(2 * num_tokens, kInf);
  auto by_suffix = [](const IndexEntry& x, const IndexEntry& y) {
    return x.suffix < y.suffix || (x.suffix == y.suffix && x.set < y.set);
  };

  const long long token_count = static_cast<long long>(num_tokens);
#pragma omp parallel for schedule(dynamic, 256) num_threads(resolve_threads(options.threads))
  for (long long tt = 0; tt < token_count; ++tt) {
    const std::size_t t = static_cast<std::size_t>(tt);
    auto first = entries.begin() + token_start[t];
    auto last = entries.begin() + token_start[t + 1];
    auto split = last;
    if (options.partition && first != last) {
      const double mean =
          prefix_total[t] / static_cast<double>(std::distance(first, last));
      split = std::partition(first, last,
                             [&](const IndexEntry& e) { return e.suffix < mean; });
    }
    for (auto it = first; it != split; ++it) {
      min_prefix[2 * t] = std::min(min_prefix[2 * t], it->suffix);
      it->suffix = sets[it->set].norm_size - it->suffix;
    }
    for (auto it = split; it != last; ++it) {
      min_prefix[2 * t + 1] = std::min(min_prefix[2 * t + 1], it->suffix);
      it->suffix = sets[it->set].norm_size - it->suffix;
    }
    std::sort(first, split, by_suffix);
    std::sort(split, last, by_suffix);
    offsets[2 * t] = token_start[t];
    offsets[2 * t + 1] = token_start[t] + std::distance(first, split);
  }
  offsets[2 * num_tokens] = entries.size();

  index.collection_ = std::move(collection);
  index.entries_ = std::move(entries);
  index.offsets_ = std::move(offsets);
  index.min_prefix_ = std::move(min_prefix);
  return index;
}

CropRange crop_list(std::span<const IndexEntry> list, double lower,
                    double upper) {
  CropRange range;
  const double lo = lower - kEps;
  const double hi = upper + kEps;
  auto first = std::partition_point(list.begin(), list.end(),
                                    [&](const IndexEntry& e) { return e.suffix < lo; });
  auto last = std::partition_point(first, list.end(),
                                   [&](const IndexEntry& e) { return e.suffix <= hi; });
  range.begin = static_cast<std::size_t>(first - list.begin());
  range.end = static_cast<std::size_t>(last - list.begin());
  range.skipped_before = range.begin;
  range.skipped_after = list.size() - range.end;
  return range;
}

}  // namespace shallowblock
