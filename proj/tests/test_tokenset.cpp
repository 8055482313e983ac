#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "shallowblock/errors.hpp"
#include "shallowblock/tokenset.hpp"

using namespace shallowblock;

TEST(Tokenize, WordSplitsOnNonAlphanumeric) {
  EXPECT_EQ(tokenize(Tokenizer::kWord, "Red Apple 2kg"),
            (std::vector<std::string>{"red", "apple", "2kg"}));
  EXPECT_EQ(tokenize(Tokenizer::kWord, "a--b,,a  B"), (std::vector<std::string>{"a", "b"}));
  EXPECT_TRUE(tokenize(Tokenizer::kWord, "").empty());
  EXPECT_TRUE(tokenize(Tokenizer::kWord, " ;; ").empty());
}

TEST(Tokenize, WordKeepsUtf8Words) {
  EXPECT_EQ(tokenize(Tokenizer::kWord, "Caf\xC3\xA9 bar"),
            (std::vector<std::string>{"caf\xC3\xA9", "bar"}));
}

TEST(Tokenize, Trigrams) {
  EXPECT_EQ(tokenize(Tokenizer::kTrigram, "abcd"), (std::vector<std::string>{"abc", "bcd"}));
  EXPECT_EQ(tokenize(Tokenizer::kTrigram, "aB  c"), (std::vector<std::string>{"ab ", "b c"}));
  EXPECT_EQ(tokenize(Tokenizer::kTrigram, "aaaa"), (std::vector<std::string>{"aaa"}));
  EXPECT_TRUE(tokenize(Tokenizer::kTrigram, "ab").empty());
}

TEST(Tokenize, TrigramsCountCodePoints) {
  // two-byte code point in the middle
  auto t = tokenize(Tokenizer::kTrigram, "a\xC3\xA9" "bc");
  EXPECT_EQ(t, (std::vector<std::string>{"a\xC3\xA9" "b", "\xC3\xA9" "bc"}));
}

TEST(Tokenize, ParseNames) {
  EXPECT_EQ(parse_tokenizer("word"), Tokenizer::kWord);
  EXPECT_EQ(parse_tokenizer("3gram"), Tokenizer::kTrigram);
  EXPECT_EQ(parse_weighting("binary"), Weighting::kBinary);
  EXPECT_EQ(parse_weighting("tfidf"), Weighting::kTfIdf);
  EXPECT_THROW(parse_tokenizer("bigram"), ConfigError);
  EXPECT_THROW(parse_weighting("bm25"), ConfigError);
}

TEST(Vocabulary, DocumentFrequenciesAndOrder) {
  std::vector<std::string> records{"a b", "b c", "b"};
  auto v = build_vocabulary(Tokenizer::kWord, records);
  auto a = *v.find("a");
  auto b = *v.find("b");
  auto c = *v.find("c");
  EXPECT_EQ(v.df(a), 1u);
  EXPECT_EQ(v.df(b), 3u);
  EXPECT_EQ(v.df(c), 1u);
  EXPECT_LT(v.rank(a), v.rank(c));
  EXPECT_LT(v.rank(c), v.rank(b));
  EXPECT_EQ(v.total_sets(), 3u);
  EXPECT_FALSE(v.find("zzz").has_value());
}

TEST(Vocabulary, DeduplicatesWithinRecord) {
  std::vector<std::string> records{"x x"};
  auto v = build_vocabulary(Tokenizer::kWord, records);
  EXPECT_EQ(v.df(*v.find("x")), 1u);
}

TEST(Vocabulary, CountsOverBothCollections) {
  std::vector<std::string> a{"a"};
  std::vector<std::string> b{"a"};
  auto v = build_vocabulary(Tokenizer::kWord, a, b);
  EXPECT_EQ(v.df(*v.find("a")), 2u);
  EXPECT_EQ(v.total_sets(), 2u);
}

TEST(Encode, BinaryL1) {
  std::vector<std::string> r{"a b"};
  auto v = build_vocabulary(Tokenizer::kWord, r);
  auto c = encode_collection(r, v, {Tokenizer::kWord, Weighting::kBinary, 1});
  ASSERT_EQ(c.sets.size(), 1u);
  ASSERT_EQ(c.sets[0].tokens.size(), 2u);
  EXPECT_DOUBLE_EQ(c.sets[0].tokens[0].weight, 1.0);
  EXPECT_DOUBLE_EQ(c.sets[0].norm_size, 2.0);
}

TEST(Encode, TfIdfWeight) {
  std::vector<std::string> r{"a b", "b c", "b"};
  auto v = build_vocabulary(Tokenizer::kWord, r);
  auto c = encode_collection(r, v, {Tokenizer::kWord, Weighting::kTfIdf, 1});
  const auto& first = c.sets[0];
  EXPECT_EQ(first.tokens[0].rank, v.rank(*v.find("a")));
  EXPECT_NEAR(first.tokens[0].weight, std::log(4.0), 1e-12);
  EXPECT_NEAR(first.tokens[0].weight, 1.3863, 1e-4);
  EXPECT_NEAR(first.tokens[1].weight, std::log(2.0), 1e-12);
}

TEST(Encode, BinaryL2IsUnitLength) {
  std::vector<std::string> r{"a b"};
  auto v = build_vocabulary(Tokenizer::kWord, r);
  auto c = encode_collection(r, v, {Tokenizer::kWord, Weighting::kBinary, 2});
  EXPECT_NEAR(c.sets[0].tokens[0].weight, 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(c.sets[0].norm_size, 1.0, 1e-12);
}

TEST(Encode, UnknownTokensDroppedAndEmptyKept) {
  std::vector<std::string> a{"a b"};
  auto v = build_vocabulary(Tokenizer::kWord, a);
  std::vector<std::string> q{"zz", "a zz", ""};
  auto c = encode_collection(q, v, {Tokenizer::kWord, Weighting::kBinary, 1});
  ASSERT_EQ(c.size(), 3u);
  EXPECT_TRUE(c.sets[0].empty());
  EXPECT_EQ(c.sets[1].tokens.size(), 1u);
  EXPECT_TRUE(c.sets[2].empty());
  EXPECT_DOUBLE_EQ(c.sets[2].norm_size, 0.0);
  EXPECT_EQ(c.sets[1].id, 1u);
}

TEST(Encode, RejectsMismatchedTokenizer) {
  std::vector<std::string> a{"abc"};
  auto v = build_vocabulary(Tokenizer::kWord, a);
  EXPECT_THROW(encode_collection(a, v, {Tokenizer::kTrigram, Weighting::kBinary, 1}),
               ConfigError);
}

TEST(MakeTokenSet, SortsAndValidates) {
  auto s = make_token_set({{5, 1.0}, {2, 3.0}}, 1, 7);
  EXPECT_EQ(s.tokens[0].rank, 2u);
  EXPECT_DOUBLE_EQ(s.norm_size, 4.0);
  EXPECT_EQ(s.id, 7u);
  EXPECT_THROW(make_token_set({{1, 1.0}, {1, 2.0}}, 1, 0), ConfigError);
  EXPECT_THROW(make_token_set({{1, 0.0}}, 1, 0), ConfigError);
  auto u = make_token_set({{1, 3.0}, {2, 4.0}}, 2, 0, true);
  EXPECT_NEAR(u.tokens[0].weight, 0.6, 1e-12);
  EXPECT_NEAR(u.norm_size, 1.0, 1e-12);
}

TEST(EncodeProperty, SetsMatchTokenizerAndNorms) {
  std::mt19937_64 rng(11);
  for (int round = 0; round < 50; ++round) {
    auto a = fx::random_records(rng, 20, 15, 8);
    auto b = fx::random_records(rng, 20, 15, 8);
    auto v = build_vocabulary(Tokenizer::kWord, a, b);
    for (int norm : {1, 2}) {
      for (Weighting w : {Weighting::kBinary, Weighting::kTfIdf}) {
        TokenSetModelConfig cfg{Tokenizer::kWord, w, norm};
        auto c = encode_collection(a, v, cfg);
        auto again = encode_collection(a, v, cfg);
        ASSERT_EQ(c.sets, again.sets);
        for (std::size_t i = 0; i < a.size(); ++i) {
          const auto& s = c.sets[i];
          ASSERT_EQ(s.tokens.size(), tokenize(Tokenizer::kWord, a[i]).size());
          double sum = 0.0;
          for (std::size_t j = 0; j < s.tokens.size(); ++j) {
            if (j) ASSERT_LT(s.tokens[j - 1].rank, s.tokens[j].rank);
            sum += norm_weight(s.tokens[j].weight, norm);
          }
          ASSERT_NEAR(sum, s.norm_size, 1e-9);
          if (norm == 2 && !s.empty()) ASSERT_NEAR(s.norm_size, 1.0, 1e-9);
        }
      }
    }
  }
}

TEST(EncodeProperty, RarerTokensWeighMore) {
  std::mt19937_64 rng(5);
  auto a = fx::random_records(rng, 60, 25, 6);
  auto v = build_vocabulary(Tokenizer::kWord, a);
  auto c = encode_collection(a, v, {Tokenizer::kWord, Weighting::kTfIdf, 1});
  for (const auto& s : c.sets) {
    for (std::size_t j = 1; j < s.tokens.size(); ++j) {
      // ranks ascend with df, weights descend (ties share a weight)
      EXPECT_GE(s.tokens[j - 1].weight, s.tokens[j].weight);
    }
  }
}
