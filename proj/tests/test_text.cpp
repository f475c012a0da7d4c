#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "ct/text.hpp"

using namespace ct;

namespace {

TokenSeq toks(std::initializer_list<const char*> l) { return TokenSeq(l.begin(), l.end()); }

std::string random_text(std::mt19937_64& rng, int words) {
  static const char* pool[] = {"The", "cat", "sat", "on", "a", "mat", ".", "It's", "2,014", "\"Yes\"", "(no)",
                               "Dr.", "U.S.", "end!", "why?", "x", "—", "3.5", "don't", "A", "\n"};
  std::string s;
  for (int i = 0; i < words; ++i) {
    if (!s.empty()) s += ' ';
    s += pool[rng() % std::size(pool)];
  }
  return s;
}

}  // namespace

TEST_CASE("tokenize: basic rules") {
  CHECK(tokenize("").empty());
  CHECK(tokenize("   \n\t").empty());
  CHECK(tokenize("The cat sat.") == toks({"the", "cat", "sat", "."}));
  CHECK(tokenize("it's 2014") == toks({"it", "'s", "2014"}));
  CHECK(tokenize("Hello,world!") == toks({"hello", ",", "world", "!"}));
  CHECK(tokenize("\"Quoted\" (paren)") == toks({"\"", "quoted", "\"", "(", "paren", ")"}));
}

TEST_CASE("tokenize: numbers keep internal separators") {
  CHECK(tokenize("3.5 million") == toks({"3.5", "million"}));
  CHECK(tokenize("1,000,000 people") == toks({"1,000,000", "people"}));
  CHECK(tokenize("in 2014.") == toks({"in", "2014", "."}));
  CHECK(tokenize("a,b") == toks({"a", ",", "b"}));
}

TEST_CASE("tokenize: clitics and curly punctuation") {
  CHECK(tokenize("don't") == toks({"don", "'t"}));
  CHECK(tokenize("It’s") == toks({"it", "'s"}));  // curly apostrophe folds to ASCII
  CHECK(tokenize("“Hi”") == toks({"“", "hi", "”"}));
  CHECK(tokenize("a—b") == toks({"a", "—", "b"}));
}

TEST_CASE("tokenize: invariants over random text") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 300; ++i) {
    auto text = random_text(rng, 1 + static_cast<int>(rng() % 30));
    auto t = tokenize(text);
    for (const auto& tok : t) {
      REQUIRE_FALSE(tok.empty());
      REQUIRE(tok.find_first_of(" \t\n\r") == std::string::npos);
    }
    REQUIRE(tokenize(text) == t);
  }
}

TEST_CASE("split_sentences: rules") {
  CHECK(split_sentences("A b. C d.").size() == 2);
  CHECK(split_sentences("").size() == 0);
  CHECK(split_sentences("no terminal punct").size() == 1);
  CHECK(split_sentences("He left. then he came").size() == 1);  // lowercase after the stop
  CHECK(split_sentences("Really? Yes! \"Sure.\" (Fine.) 2020 came.").size() == 5);
  auto s = split_sentences("First one.  Second one!");
  REQUIRE(s.size() == 2);
  CHECK(sentence_text("First one.  Second one!", s, 0) == "First one.");
  CHECK(sentence_text("First one.  Second one!", s, 1) == "Second one!");
  CHECK(s.sentences[1] == toks({"second", "one", "!"}));
}

TEST_CASE("split_sentences: spans increase and cover the tokens") {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 300; ++i) {
    auto text = random_text(rng, 1 + static_cast<int>(rng() % 40));
    auto s = split_sentences(text);
    REQUIRE(s.sentences.size() == s.spans.size());
    std::size_t prev_end = 0;
    TokenSeq all;
    for (std::size_t k = 0; k < s.size(); ++k) {
      REQUIRE(s.spans[k].begin >= prev_end);
      REQUIRE(s.spans[k].end > s.spans[k].begin);
      prev_end = s.spans[k].end;
      REQUIRE(tokenize(sentence_text(text, s, k)) == s.sentences[k]);
      all.insert(all.end(), s.sentences[k].begin(), s.sentences[k].end());
    }
    REQUIRE(all == tokenize(text));
    REQUIRE(flatten(s) == all);
    REQUIRE(token_count(s) == all.size());
  }
}

TEST_CASE("unigram_distribution") {
  auto d = unigram_distribution(SentenceSeq::from_tokens({toks({"a", "a"}), toks({"a", "b"})}));
  CHECK(d.prob("a") == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(d.prob("b") == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(d.prob("zzz") == 0.0);
  CHECK(unigram_distribution(SentenceSeq::from_tokens({toks({"x"})})).prob("x") == 1.0);
  CHECK_THROWS_AS(unigram_distribution(SentenceSeq{}), TextError);
  CHECK_THROWS_AS(unigram_distribution(SentenceSeq::from_tokens({TokenSeq{}})), TextError);

  d.discount("a", [](double p) { return p * p; });
  CHECK(d.prob("a") == doctest::Approx(0.5625));
  CHECK(d.total() == doctest::Approx(0.8125));
}

TEST_CASE("unigram_distribution sums to one on random corpora") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    std::vector<TokenSeq> sents(1 + rng() % 6);
    for (auto& s : sents) {
      for (std::size_t k = 0; k < 1 + rng() % 8; ++k) s.push_back(std::string(1, static_cast<char>('a' + rng() % 7)));
    }
    auto d = unigram_distribution(std::span<const TokenSeq>(sents));
    REQUIRE(std::abs(d.total() - 1.0) < 1e-9);
    for (const auto& [w, p] : d.probs()) REQUIRE((p > 0.0 && p <= 1.0));
  }
}

TEST_CASE("content_overlap") {
  StopwordSet none;
  CHECK(content_overlap(toks({"cat", "sat"}), toks({"cat", "ran"}), none) == 0.5);
  CHECK(content_overlap(toks({"x", "y"}), toks({"x", "y"}), none) == 1.0);
  CHECK(content_overlap(toks({"x"}), toks({"y"}), none) == 0.0);
  CHECK(content_overlap(toks({"the", "of"}), toks({"the"}), default_stopwords()) == 0.0);
  // stopwords removed from both sides: 1 shared of 2 content words
  CHECK(content_overlap(toks({"the", "cat", "sat"}), toks({"a", "cat"}), default_stopwords()) == 0.5);
}

TEST_CASE("content_overlap is invariant under permutation of b") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 200; ++i) {
    TokenSeq a, b;
    for (int k = 0; k < 6; ++k) a.push_back(std::string(1, static_cast<char>('a' + rng() % 6)));
    for (int k = 0; k < 6; ++k) b.push_back(std::string(1, static_cast<char>('a' + rng() % 6)));
    auto before = content_overlap(a, b, StopwordSet{});
    std::shuffle(b.begin(), b.end(), rng);
    REQUIRE(content_overlap(a, b, StopwordSet{}) == before);
  }
}

TEST_CASE("repetition_ratio") {
  CHECK(repetition_ratio(toks({"a", "b", "c"})) == 1.0);
  CHECK(repetition_ratio(toks({"a", "a", "a", "a"})) == 0.25);
  CHECK(repetition_ratio(toks({"a", "b", "a"})) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(repetition_ratio(TokenSeq{}), TextError);

  std::mt19937_64 rng(2);
  for (int i = 0; i < 200; ++i) {
    TokenSeq x;
    for (std::size_t k = 0; k < 1 + rng() % 8; ++k) x.push_back(std::string(1, static_cast<char>('a' + rng() % 5)));
    bool distinct = std::set<std::string>(x.begin(), x.end()).size() == x.size();
    REQUIRE((repetition_ratio(x) == 1.0) == distinct);
  }
}

TEST_CASE("stopwords file matches the built-in list") {
  auto loaded = load_stopwords(CT_DATA_DIR "/stopwords.txt");
  CHECK(loaded == default_stopwords());
  CHECK(loaded.size() >= 100);
  CHECK(loaded.contains("the"));
  CHECK_THROWS(load_stopwords("/nonexistent/stopwords.txt"));
}
