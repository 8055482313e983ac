#pragma once

// Query-side traversal shared by the join and the estimators. A State decides
// what happens to verified candidates; the traversal owns prefix, PPS and
// positional filtering and the traversal-rank bookkeeping.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "shallowblock/join.hpp"
#include "shallowblock/pps_index.hpp"
#include "shallowblock/similarity.hpp"

namespace shallowblock::detail {

// Strict order of candidates: higher score first, ties by smaller set id.
inline bool better(double s1, std::uint32_t id1, double s2, std::uint32_t id2) {
  return s1 > s2 || (s1 == s2 && id1 < id2);
}

struct QueueItem {
  double score;
  std::uint32_t set;
  std::uint64_t rank;  // traversal rank at discovery
};

// Binary heap whose top is the worst candidate.
class TopQueue {
 public:
  void clear() { items_.clear(); }
  bool empty() const { return items_.empty(); }
  std::size_t size() const { return items_.size(); }
  const QueueItem& top() const { return items_.front(); }

  void push(const QueueItem& item) {
    items_.push_back(item);
    std::push_heap(items_.begin(), items_.end(), worse_last);
  }
  QueueItem pop() {
    std::pop_heap(items_.begin(), items_.end(), worse_last);
    QueueItem item = items_.back();
    items_.pop_back();
    return item;
  }

  const std::vector<QueueItem>& items() const { return items_; }
  std::vector<QueueItem> sorted() const {
    std::vector<QueueItem> out = items_;
    std::sort(out.begin(), out.end(), [](const QueueItem& x, const QueueItem& y) {
      return better(x.score, x.set, y.score, y.set);
    });
    return out;
  }

 private:
  static bool worse_last(const QueueItem& x, const QueueItem& y) {
    return better(x.score, x.set, y.score, y.set);
  }
  std::vector<QueueItem> items_;
};

// Q together with the dynamic threshold it drives.
class ConditionQueue {
 public:
  void reset(double tau, double tau_r, std::uint64_t k) {
    queue_.clear();
    tau_tilde_ = tau;
    tau_r_ = tau_r;
    k_ = k;
  }
  double threshold() const { return tau_tilde_; }
  const TopQueue& queue() const { return queue_; }

  // Push, pop overflow, tighten by the k-th best, then by tau_r * S and prune.
  // `removed` sees every item that leaves the queue.
  template <class OnPush, class OnRemove>
  void offer(const QueueItem& item, OnPush&& pushed, OnRemove&& removed) {
    queue_.push(item);
    pushed(item);
    if (queue_.size() > k_) removed(queue_.pop());
    if (queue_.size() == k_) tau_tilde_ = std::max(tau_tilde_, queue_.top().score);
    if (tau_r_ * item.score > tau_tilde_) {
      tau_tilde_ = tau_r_ * item.score;
      while (!queue_.empty() && queue_.top().score < tau_tilde_) {
        removed(queue_.pop());
      }
    }
  }

 private:
  TopQueue queue_;
  double tau_tilde_ = 0.0;
  double tau_r_ = 0.0;
  std::uint64_t k_ = kUnbounded;
};

// Epoch-stamped membership set over target ids.
class VisitedSet {
 public:
  explicit VisitedSet(std::size_t n = 0) : stamp_(n, 0) {}
  void next_query() {
    if (++epoch_ == 0) {
      std::fill(stamp_.begin(), stamp_.end(), 0);
      epoch_ = 1;
    }
  }
  bool insert(std::uint32_t id) {
    if (stamp_[id] == epoch_) return false;
    stamp_[id] = epoch_;
    return true;
  }

 private:
  std::vector<std::uint32_t> stamp_;
  std::uint32_t epoch_ = 0;
};

// suffix_bound_sigma without validation, for the inner loop.
inline double sigma_fast(Measure measure, double size, double tau) {
  switch (measure) {
    case Measure::kJaccard: return tau * size;
    case Measure::kDice: return tau * size / (2.0 - tau);
    case Measure::kCosine: return tau * tau;
    case Measure::kOverlap: return tau;
  }
  return 0.0;
}

struct TraversalLimits {
  std::uint64_t max_rank = kUnbounded;
  bool positional_filter = true;
  bool pps_crop = true;
  bool exclude_self = false;
};

struct TraversalTotals {
  std::uint64_t rank = 0;  // traversal rank when the search stopped
  std::uint64_t pre_candidates = 0;
  std::uint64_t candidates = 0;
  std::uint64_t verified_tokens = 0;  // merge work spent in verification
  double suffix = 0.0;                // s_a when the search stopped
  bool cut = false;                   // stopped by max_rank
};

// State must provide
//   double threshold() const;
//   void offer(std::uint32_t set, double score, std::uint64_t rank);
//   void after_entry(std::uint64_t rank, double suffix_a, std::uint32_t set);
//   void verified(std::uint64_t tokens);  // merge length of one verification
// offer() only sees scores > 0 that reach the current threshold.
template <class State>
TraversalTotals traverse_query(const WeightedTokenSet& a, std::uint32_t self,
                               const PpsIndex& index,
                               const TraversalLimits& limits,
                               VisitedSet& visited, State& state) {
  TraversalTotals totals;
  const auto& sets = index.collection().sets;
  const Measure measure = index.measure();
  const int norm = norm_of(measure);
  const double size_a = a.norm_size;
  double s_a = size_a;
  double p_a = 0.0;
  std::uint64_t rho = 0;
  visited.next_query();

  for (std::size_t i = 0; i < a.tokens.size(); ++i) {
    if (s_a < sigma_fast(measure, size_a, state.threshold()) - kEps) break;
    const TokenRank token = a.tokens[i].rank;
    for (int side = 0; side < 2; ++side) {
      PostingList list = side == 0 ? index.below(token) : index.above(token);
      if (list.entries.empty()) continue;
      std::size_t begin = 0;
      std::size_t end = list.entries.size();
      if (limits.pps_crop) {
        SuffixBounds bounds = index_suffix_bounds(
            measure, size_a, p_a, s_a, list.min_prefix, state.threshold());
        CropRange range = crop_list(list.entries, bounds.lower, bounds.upper);
        begin = range.begin;
        end = range.end;
      }
      rho += begin;
      for (std::size_t e = begin; e < end; ++e) {
        ++rho;
        if (rho > limits.max_rank) {
          totals.cut = true;
          totals.rank = rho - 1;
          totals.suffix = s_a;
          return totals;
        }
        ++totals.pre_candidates;
        const IndexEntry& entry = list.entries[e];
        const WeightedTokenSet& b = sets[entry.set];
        const double tau = state.threshold();
        bool pruned = limits.exclude_self && entry.set == self;
        if (!pruned && limits.positional_filter) {
          double alpha = equivalent_overlap(measure, size_a, b.norm_size, tau);
          pruned = suffix_overlap_bound(measure, s_a, entry.suffix) < alpha - kEps;
        }
        if (!pruned && visited.insert(entry.set)) {
          ++totals.candidates;
          const std::uint64_t work =
              a.tokens.size() - i + b.tokens.size() - entry.position;
          totals.verified_tokens += work;
          state.verified(work);
          double score = partial_sim(a, b, i, entry.position, s_a, entry.suffix,
                                     tau, measure);
          if (score > 0.0 && score >= tau) state.offer(entry.set, score, rho);
        }
        state.after_entry(rho, s_a, entry.set);
      }
      rho += list.entries.size() - end;
    }
    const double w = norm_weight(a.tokens[i].weight, norm);
    s_a -= w;
    p_a += w;
  }
  totals.rank = rho;
  totals.suffix = s_a > 0.0 ? s_a : 0.0;
  return totals;
}

}  // namespace shallowblock::detail
