#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace shallowblock {

enum class Tokenizer { kWord, kTrigram };
enum class Weighting { kBinary, kTfIdf };

std::string_view to_string(Tokenizer tokenizer);
std::string_view to_string(Weighting weighting);
Tokenizer parse_tokenizer(std::string_view name);
Weighting parse_weighting(std::string_view name);

// Splits a record into its distinct tokens, in order of first occurrence.
//
// kWord lowercases ASCII letters and splits on every maximal run of
// non-alphanumeric bytes. Bytes >= 0x80 count as alphanumeric so UTF-8 words
// stay intact. kTrigram lowercases, collapses whitespace runs into a single
// space and emits every run of three consecutive code points.
std::vector<std::string> tokenize(Tokenizer mode, std::string_view text);

using TokenId = std::uint32_t;
// Position in the global token ordering; 0 is the rarest token.
using TokenRank = std::uint32_t;

class Vocabulary {
 public:
  Vocabulary() = default;

  Tokenizer mode() const { return mode_; }
  std::size_t size() const { return df_.size(); }
  // Number of records the document frequencies were counted over.
  std::size_t total_sets() const { return total_sets_; }

  std::optional<TokenId> find(std::string_view token) const;
  const std::string& token(TokenId id) const { return tokens_[id]; }
  std::uint32_t df(TokenId id) const { return df_[id]; }
  TokenRank rank(TokenId id) const { return rank_[id]; }

 private:
  friend Vocabulary build_vocabulary(Tokenizer, std::span<const std::string>,
                                     std::span<const std::string>);

  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const {
      return std::hash<std::string_view>{}(s);
    }
  };

  Tokenizer mode_ = Tokenizer::kWord;
  std::size_t total_sets_ = 0;
  std::unordered_map<std::string, TokenId, Hash, std::equal_to<>> ids_;
  std::vector<std::string> tokens_;
  std::vector<std::uint32_t> df_;
  std::vector<TokenRank> rank_;
};

// Counts set-level document frequencies over one or two collections and
// orders tokens by increasing frequency, ties by first occurrence.
Vocabulary build_vocabulary(Tokenizer mode, std::span<const std::string> first,
                            std::span<const std::string> second = {});

struct TokenSetModelConfig {
  Tokenizer tokenizer = Tokenizer::kWord;
  Weighting weighting = Weighting::kTfIdf;
  // 1 for Jaccard, Dice and Overlap; 2 (unit L2 vectors) for Cosine.
  int norm = 1;

  std::string name() const;
  friend bool operator==(const TokenSetModelConfig&,
                         const TokenSetModelConfig&) = default;
};

struct WeightedToken {
  TokenRank rank;
  double weight;

  friend bool operator==(const WeightedToken&, const WeightedToken&) = default;
};

// Contribution of one token weight to an l-norm sum.
inline double norm_weight(double weight, int norm) {
  return norm == 2 ? weight * weight : weight;
}

struct WeightedTokenSet {
  std::vector<WeightedToken> tokens;  // strictly increasing rank
  double norm_size = 0.0;             // sum of weight^l
  std::uint32_t id = 0;               // position in the source collection

  bool empty() const { return tokens.empty(); }
  friend bool operator==(const WeightedTokenSet&,
                         const WeightedTokenSet&) = default;
};

// Builds a set from arbitrary (rank, weight) pairs: sorts by rank, rejects
// duplicates and non-positive weights, optionally rescales to unit L2 length
// and caches the l-norm size.
WeightedTokenSet make_token_set(std::vector<WeightedToken> tokens, int norm,
                                std::uint32_t id, bool unit_normalize = false);

struct TokenSetCollection {
  TokenSetModelConfig config;
  std::vector<WeightedTokenSet> sets;

  std::size_t size() const { return sets.size(); }
  int norm() const { return config.norm; }
};

TokenSetCollection encode_collection(std::span<const std::string> records,
                                     const Vocabulary& vocab,
                                     const TokenSetModelConfig& config);

}  // namespace shallowblock
