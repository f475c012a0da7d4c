#include "ct/text.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_map>

namespace ct {

namespace {

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }

// Multi-byte UTF-8 punctuation that should be split like ASCII punctuation.
// Returns its byte length at `pos`, 0 if none.
std::size_t utf8_punct_len(std::string_view s, std::size_t pos) {
  static constexpr std::string_view kPunct[] = {
      "“", "”", "‘", "’", "–", "—", "…", "«", "»",
  };
  for (auto p : kPunct) {
    if (s.substr(pos, p.size()) == p) return p.size();
  }
  return 0;
}

bool is_apostrophe(std::string_view s, std::size_t pos, std::size_t* len) {
  if (s[pos] == '\'') {
    *len = 1;
    return true;
  }
  if (s.substr(pos, 3) == "’") {
    *len = 3;
    return true;
  }
  return false;
}

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

void tokenize_chunk(std::string_view chunk, TokenSeq& out) {
  std::string word;
  auto flush = [&] {
    if (!word.empty()) {
      out.push_back(lower_ascii(word));
      word.clear();
    }
  };
  std::size_t i = 0;
  while (i < chunk.size()) {
    auto c = static_cast<unsigned char>(chunk[i]);
    std::size_t alen = 0;
    if (is_apostrophe(chunk, i, &alen)) {
      bool prev_word = !word.empty();
      bool next_alpha = i + alen < chunk.size() && std::isalpha(static_cast<unsigned char>(chunk[i + alen]));
      if (prev_word && next_alpha) {
        flush();
        word = "'";
        i += alen;
        continue;
      }
      flush();
      out.emplace_back("'");
      i += alen;
      continue;
    }
    if (std::size_t plen = utf8_punct_len(chunk, i); plen > 0) {
      flush();
      out.emplace_back(chunk.substr(i, plen));
      i += plen;
      continue;
    }
    if (is_word_byte(c)) {
      word.push_back(static_cast<char>(c));
      ++i;
      continue;
    }
    if ((c == '.' || c == ',') && !word.empty() && is_digit(static_cast<unsigned char>(word.back())) &&
        i + 1 < chunk.size() && is_digit(static_cast<unsigned char>(chunk[i + 1]))) {
      word.push_back(static_cast<char>(c));
      ++i;
      continue;
    }
    flush();
    out.emplace_back(1, static_cast<char>(c));
    ++i;
  }
  flush();
}

bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

bool is_closing(std::string_view s, std::size_t pos, std::size_t* len) {
  char c = s[pos];
  if (c == '"' || c == '\'' || c == ')' || c == ']') {
    *len = 1;
    return true;
  }
  if (s.substr(pos, 3) == "”" || s.substr(pos, 3) == "’") {
    *len = 3;
    return true;
  }
  return false;
}

bool is_sentence_start(std::string_view s, std::size_t pos) {
  auto c = static_cast<unsigned char>(s[pos]);
  if ((c >= 'A' && c <= 'Z') || is_digit(c)) return true;
  if (c == '"' || c == '\'' || c == '(' || c == '[') return true;
  if (s.substr(pos, 3) == "“" || s.substr(pos, 3) == "‘") return true;
  // Latin-1 supplement capitals (U+00C0..U+00DE).
  if (c == 0xC3 && pos + 1 < s.size()) {
    auto d = static_cast<unsigned char>(s[pos + 1]);
    return d >= 0x80 && d <= 0x9E && d != 0x97;
  }
  return false;
}

}  // namespace

TokenSeq tokenize(std::string_view text) {
  TokenSeq out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_space(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) tokenize_chunk(text.substr(start, i - start), out);
  }
  return out;
}

SentenceSeq split_sentences(std::string_view text) {
  SentenceSeq seq;
  auto emit = [&](std::size_t b, std::size_t e) {
    while (b < e && is_space(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(text[e - 1]))) --e;
    if (b == e) return;
    seq.spans.push_back({b, e});
    seq.sentences.push_back(tokenize(text.substr(b, e - b)));
  };

  std::size_t begin = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_terminal(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < text.size()) {
      std::size_t len = 0;
      if (is_terminal(text[j])) {
        ++j;
      } else if (is_closing(text, j, &len)) {
        j += len;
      } else {
        break;
      }
    }
    if (j >= text.size() || !is_space(static_cast<unsigned char>(text[j]))) {
      i = j;
      continue;
    }
    std::size_t k = j;
    while (k < text.size() && is_space(static_cast<unsigned char>(text[k]))) ++k;
    if (k < text.size() && is_sentence_start(text, k)) {
      emit(begin, j);
      begin = k;
    }
    i = k;
  }
  emit(begin, text.size());
  return seq;
}

SentenceSeq SentenceSeq::from_tokens(std::vector<TokenSeq> sentences) {
  SentenceSeq seq;
  seq.spans.resize(sentences.size());
  seq.sentences = std::move(sentences);
  return seq;
}

std::string_view sentence_text(std::string_view text, const SentenceSeq& seq, std::size_t i) {
  const auto& sp = seq.spans.at(i);
  return text.substr(sp.begin, sp.end - sp.begin);
}

std::size_t token_count(const SentenceSeq& seq) {
  std::size_t n = 0;
  for (const auto& s : seq.sentences) n += s.size();
  return n;
}

TokenSeq flatten(const SentenceSeq& seq) {
  TokenSeq out;
  out.reserve(token_count(seq));
  for (const auto& s : seq.sentences) out.insert(out.end(), s.begin(), s.end());
  return out;
}

std::string join(std::span<const std::string> tokens, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

double UnigramDistribution::prob(const std::string& w) const {
  auto it = probs_.find(w);
  return it == probs_.end() ? 0.0 : it->second;
}

void UnigramDistribution::discount(const std::string& w, DiscountFn fn) {
  auto it = probs_.find(w);
  if (it != probs_.end()) it->second = fn(it->second);
}

double UnigramDistribution::total() const {
  double s = 0.0;
  for (const auto& [w, p] : probs_) s += p;
  return s;
}

UnigramDistribution unigram_distribution(std::span<const TokenSeq> sentences) {
  std::map<std::string, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& s : sentences) {
    for (const auto& t : s) {
      ++counts[t];
      ++total;
    }
  }
  if (total == 0) throw TextError("unigram_distribution: corpus has no tokens");
  std::map<std::string, double> probs;
  for (const auto& [w, c] : counts) probs.emplace(w, static_cast<double>(c) / static_cast<double>(total));
  return UnigramDistribution(std::move(probs));
}

UnigramDistribution unigram_distribution(const SentenceSeq& sentences) {
  return unigram_distribution(std::span<const TokenSeq>(sentences.sentences));
}

double content_overlap(const TokenSeq& a, const TokenSeq& b, const StopwordSet& stopwords) {
  std::unordered_set<std::string> ua;
  for (const auto& t : a) {
    if (!stopwords.contains(t)) ua.insert(t);
  }
  if (ua.empty()) return 0.0;
  std::unordered_set<std::string> ub;
  for (const auto& t : b) {
    if (!stopwords.contains(t)) ub.insert(t);
  }
  std::size_t shared = 0;
  for (const auto& t : ua) shared += ub.contains(t);
  return static_cast<double>(shared) / static_cast<double>(ua.size());
}

double repetition_ratio(const TokenSeq& x) {
  if (x.empty()) throw TextError("repetition_ratio: empty sequence");
  std::unordered_set<std::string_view> unique(x.begin(), x.end());
  return static_cast<double>(unique.size()) / static_cast<double>(x.size());
}

}  // namespace ct
