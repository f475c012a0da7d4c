#include <fstream>

#include "ct/text.hpp"

namespace ct {

namespace {

constexpr const char* kStopwords[] = {
    "a",
    "about",
    "above",
    "after",
    "again",
    "against",
    "all",
    "am",
    "an",
    "and",
    "any",
    "are",
    "as",
    "at",
    "be",
    "because",
    "been",
    "before",
    "being",
    "below",
    "between",
    "both",
    "but",
    "by",
    "can",
    "could",
    "did",
    "do",
    "does",
    "doing",
    "down",
    "during",
    "each",
    "few",
    "for",
    "from",
    "further",
    "had",
    "has",
    "have",
    "having",
    "he",
    "her",
    "here",
    "hers",
    "herself",
    "him",
    "himself",
    "his",
    "how",
    "i",
    "if",
    "in",
    "into",
    "is",
    "it",
    "its",
    "itself",
    "just",
    "me",
    "more",
    "most",
    "my",
    "myself",
    "no",
    "nor",
    "not",
    "now",
    "of",
    "off",
    "on",
    "once",
    "only",
    "or",
    "other",
    "our",
    "ours",
    "ourselves",
    "out",
    "over",
    "own",
    "same",
    "she",
    "should",
    "so",
    "some",
    "such",
    "than",
    "that",
    "the",
    "their",
    "theirs",
    "them",
    "themselves",
    "then",
    "there",
    "these",
    "they",
    "this",
    "those",
    "through",
    "to",
    "too",
    "under",
    "until",
    "up",
    "very",
    "was",
    "we",
    "were",
    "what",
    "when",
    "where",
    "which",
    "while",
    "who",
    "whom",
    "why",
    "will",
    "with",
    "would",
    "you",
    "your",
    "yours",
    "yourself",
    "yourselves",
    "'s",
    "'t",
    "also",
    "may",
    "might",
    "must",
    "shall",
    "upon",
    "yet",
    "however",
    "although",
    "though",
    "whether",
    "either",
    "neither",
    "every",
    "many",
    "much",
    "another",
    "among",
    "within",
    "without",
    "across",
    "along",
    "around",
    "since",
    "onto",
    "per",
    "via",
    "us",
};

}  // namespace

const StopwordSet& default_stopwords() {
  static const StopwordSet set(std::begin(kStopwords), std::end(kStopwords));
  return set;
}

StopwordSet load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TextError("cannot open stopword file: " + path);
  StopwordSet set;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    set.insert(line);
  }
  return set;
}

}  // namespace ct
