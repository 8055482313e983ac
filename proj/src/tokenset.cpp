#include "shallowblock/tokenset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "shallowblock/errors.hpp"

namespace shallowblock {

namespace {

bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z') || c >= 0x80;
}

bool is_space_byte(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

char ascii_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

// Byte length of the UTF-8 sequence starting with `lead`. Stray continuation
// bytes are treated as single characters.
std::size_t utf8_length(unsigned char lead) {
  if (lead < 0xC0) return 1;
  if (lead < 0xE0) return 2;
  if (lead < 0xF0) return 3;
  return 4;
}

class DedupSink {
 public:
  explicit DedupSink(std::vector<std::string>& out) : out_(out) {}
  void add(std::string token) {
    if (seen_.insert(token).second) out_.push_back(std::move(token));
  }

 private:
  std::vector<std::string>& out_;
  std::unordered_set<std::string> seen_;
};

}  // namespace

std::string_view to_string(Tokenizer tokenizer) {
  return tokenizer == Tokenizer::kWord ? "word" : "3gram";
}

std::string_view to_string(Weighting weighting) {
  return weighting == Weighting::kBinary ? "binary" : "tfidf";
}

Tokenizer parse_tokenizer(std::string_view name) {
  if (name == "word") return Tokenizer::kWord;
  if (name == "3gram" || name == "trigram") return Tokenizer::kTrigram;
  throw ConfigError("unknown tokenizer '" + std::string(name) + "'");
}

Weighting parse_weighting(std::string_view name) {
  if (name == "binary") return Weighting::kBinary;
  if (name == "tfidf") return Weighting::kTfIdf;
  throw ConfigError("unknown weighting '" + std::string(name) + "'");
}

std::vector<std::string> tokenize(Tokenizer mode, std::string_view text) {
  std::vector<std::string> tokens;
  DedupSink sink(tokens);

  if (mode == Tokenizer::kWord) {
    std::size_t i = 0;
    while (i < text.size()) {
      while (i < text.size() && !is_word_byte(text[i])) ++i;
      std::size_t start = i;
      while (i < text.size() && is_word_byte(text[i])) ++i;
      if (i > start) {
        std::string word(text.substr(start, i - start));
        std::transform(word.begin(), word.end(), word.begin(), ascii_lower);
        sink.add(std::move(word));
      }
    }
    return tokens;
  }

  std::string normalized;
  normalized.reserve(text.size());
  bool in_space = false;
  for (char c : text) {
    if (is_space_byte(static_cast<unsigned char>(c))) {
      if (!in_space) normalized.push_back(' ');
      in_space = true;
    } else {
      normalized.push_back(ascii_lower(c));
      in_space = false;
    }
  }

  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < normalized.size();) {
    starts.push_back(i);
    i += utf8_length(static_cast<unsigned char>(normalized[i]));
  }
  starts.push_back(normalized.size());
  for (std::size_t c = 0; c + 3 < starts.size(); ++c) {
    std::size_t begin = starts[c];
    std::size_t end = std::min(starts[c + 3], normalized.size());
    sink.add(normalized.substr(begin, end - begin));
  }
  return tokens;
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = ids_.find(token);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

Vocabulary build_vocabulary(Tokenizer mode, std::span<const std::string> first,
                            std::span<const std::string> second) {
  Vocabulary vocab;
  vocab.mode_ = mode;
  for (auto collection : {first, second}) {
    for (const std::string& record : collection) {
      ++vocab.total_sets_;
      for (std::string& token : tokenize(mode, record)) {
        auto [it, inserted] = vocab.ids_.try_emplace(
            token, static_cast<TokenId>(vocab.tokens_.size()));
        if (inserted) {
          vocab.tokens_.push_back(std::move(token));
          vocab.df_.push_back(0);
        }
        ++vocab.df_[it->second];
      }
    }
  }

  std::vector<TokenId> order(vocab.df_.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](TokenId x, TokenId y) {
    return vocab.df_[x] < vocab.df_[y];
  });
  vocab.rank_.resize(order.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    vocab.rank_[order[r]] = static_cast<TokenRank>(r);
  }
  return vocab;
}

std::string TokenSetModelConfig::name() const {
  std::string out(to_string(weighting));
  out += '-';
  out += to_string(tokenizer);
  if (norm == 2) out += "-l2";
  return out;
}

WeightedTokenSet make_token_set(std::vector<WeightedToken> tokens, int norm,
                                std::uint32_t id, bool unit_normalize) {
  if (norm != 1 && norm != 2) throw ConfigError("norm must be 1 or 2");
  std::sort(tokens.begin(), tokens.end(),
            [](const WeightedToken& x, const WeightedToken& y) {
              return x.rank < y.rank;
            });
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!(tokens[i].weight > 0.0)) {
      throw ConfigError("token weights must be positive");
    }
    if (i > 0 && tokens[i].rank == tokens[i - 1].rank) {
      throw ConfigError("duplicate token in weighted set");
    }
  }
  if (unit_normalize && !tokens.empty()) {
    double squared = 0.0;
    for (const auto& t : tokens) squared += t.weight * t.weight;
    double scale = 1.0 / std::sqrt(squared);
    for (auto& t : tokens) t.weight *= scale;
  }

  WeightedTokenSet set;
  set.id = id;
  for (const auto& t : tokens) set.norm_size += norm_weight(t.weight, norm);
  set.tokens = std::move(tokens);
  return set;
}

TokenSetCollection encode_collection(std::span<const std::string> records,
                                     const Vocabulary& vocab,
                                     const TokenSetModelConfig& config) {
  if (config.tokenizer != vocab.mode()) {
    throw ConfigError("vocabulary was built with a different tokenizer");
  }
  TokenSetCollection out;
  out.config = config;
  out.sets.reserve(records.size());
  const double n = static_cast<double>(vocab.total_sets());

  std::vector<WeightedToken> tokens;
  for (std::size_t r = 0; r < records.size(); ++r) {
    tokens.clear();
    for (const std::string& token : tokenize(config.tokenizer, records[r])) {
      auto id = vocab.find(token);
      if (!id) continue;
      double weight = 1.0;
      if (config.weighting == Weighting::kTfIdf) {
        weight = std::log1p(n / static_cast<double>(vocab.df(*id)));
      }
      tokens.push_back({vocab.rank(*id), weight});
    }
    out.sets.push_back(make_token_set(tokens, config.norm,
                                      static_cast<std::uint32_t>(r),
                                      config.norm == 2));
  }
  return out;
}

}  // namespace shallowblock
