#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace ct {

/// Ordered, normalized word tokens. Produced by tokenize(); never holds empty
/// tokens or tokens with embedded whitespace.
using TokenSeq = std::vector<std::string>;

using StopwordSet = std::unordered_set<std::string>;

struct CharSpan {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
};

/// Sentence segmentation of one text. sentences[i] are the tokens of the
/// source substring spans[i].
struct SentenceSeq {
  std::vector<TokenSeq> sentences;
  std::vector<CharSpan> spans;

  std::size_t size() const { return sentences.size(); }
  bool empty() const { return sentences.empty(); }

  /// Builds a segmentation from pre-tokenized sentences (no source spans).
  static SentenceSeq from_tokens(std::vector<TokenSeq> sentences);
};

/// Raised when an operation has no well-defined result for its input.
class TextError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Lowercases, splits on whitespace and separates punctuation. Apostrophe
/// clitics stay attached to what follows ("it's" -> "it", "'s"); '.' and ','
/// between digits stay inside the number.
TokenSeq tokenize(std::string_view text);

/// Rule-based segmentation: a sentence ends at . ! or ? (plus any closing
/// quotes/brackets) when followed by whitespace and then an uppercase letter,
/// digit, or opening quote/bracket.
SentenceSeq split_sentences(std::string_view text);

/// The text of sentence `i` as it appears in `text`.
std::string_view sentence_text(std::string_view text, const SentenceSeq& seq, std::size_t i);

std::size_t token_count(const SentenceSeq& seq);
TokenSeq flatten(const SentenceSeq& seq);
std::string join(std::span<const std::string> tokens, std::string_view sep = " ");

/// Word probabilities. Built by relative frequency; discount() squares (or
/// applies a custom map to) individual entries without renormalizing.
class UnigramDistribution {
 public:
  using DiscountFn = double (*)(double);

  UnigramDistribution() = default;
  explicit UnigramDistribution(std::map<std::string, double> probs) : probs_(std::move(probs)) {}

  /// Probability of `w`, 0 when absent.
  double prob(const std::string& w) const;
  void discount(const std::string& w, DiscountFn fn);
  double total() const;

  const std::map<std::string, double>& probs() const { return probs_; }
  std::size_t size() const { return probs_.size(); }

 private:
  std::map<std::string, double> probs_;
};

/// p(w) = count(w) / total tokens. Throws TextError when there are no tokens.
UnigramDistribution unigram_distribution(const SentenceSeq& sentences);
UnigramDistribution unigram_distribution(std::span<const TokenSeq> sentences);

/// |unique(a) ∩ unique(b)| / |unique(a)| after stopword removal, 0 if a is
/// left empty.
double content_overlap(const TokenSeq& a, const TokenSeq& b, const StopwordSet& stopwords);

/// |unique(x)| / |x|. Throws TextError on empty input.
double repetition_ratio(const TokenSeq& x);

/// Built-in English stopword list (also shipped as data/stopwords.txt).
const StopwordSet& default_stopwords();
/// One token per line, UTF-8; blank lines and lines starting with '#' skipped.
StopwordSet load_stopwords(const std::string& path);

}  // namespace ct
