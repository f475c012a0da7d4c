#include "ct/bpe.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace ct {

std::vector<std::string> utf8_chars(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if (c >= 0xF0 && c <= 0xF7) {
      len = 4;
    } else if (c >= 0xE0) {
      len = 3;
    } else if (c >= 0xC0) {
      len = 2;
    }
    if (i + len > s.size()) len = 1;
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) {
        len = 1;
        break;
      }
    }
    out.emplace_back(s.substr(i, len));
    i += len;
  }
  return out;
}

BpeModel::BpeModel(std::vector<std::string> alphabet, std::vector<std::pair<std::string, std::string>> merges)
    : alphabet_(std::move(alphabet)), merges_(std::move(merges)) {
  std::sort(alphabet_.begin(), alphabet_.end());
  alphabet_.erase(std::unique(alphabet_.begin(), alphabet_.end()), alphabet_.end());
  symbols_ = {"<pad>", "<s>", "</s>", "<unk>", "<sep>", kEndOfWord};
  for (const auto& c : alphabet_) symbols_.push_back(c);
  for (std::size_t r = 0; r < merges_.size(); ++r) {
    const auto& m = merges_[r];
    rank_.emplace(m, r);
    symbols_.push_back(m.first + m.second);
  }
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    // Merged symbols can coincide with an existing one; the first id wins.
    ids_.emplace(symbols_[i], static_cast<TokenId>(i));
  }
}

TokenId BpeModel::id_of(const std::string& symbol) const {
  auto it = ids_.find(symbol);
  return it == ids_.end() ? Specials::kUnk : it->second;
}

namespace {

using Word = std::vector<std::string>;

void apply_merge(Word& w, const std::string& a, const std::string& b) {
  Word out;
  out.reserve(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i + 1 < w.size() && w[i] == a && w[i + 1] == b) {
      out.push_back(a + b);
      ++i;
    } else {
      out.push_back(w[i]);
    }
  }
  w = std::move(out);
}

}  // namespace

BpeModel BpeModel::train(std::span<const TokenSeq> corpus, std::size_t vocab_size) {
  std::map<std::string, std::size_t> word_freq;
  for (const auto& seq : corpus) {
    for (const auto& t : seq) ++word_freq[t];
  }
  if (word_freq.empty()) throw BpeError("train_bpe: empty corpus");

  std::set<std::string> chars;
  std::vector<std::pair<Word, std::size_t>> words;
  for (const auto& [w, f] : word_freq) {
    auto cs = utf8_chars(w);
    chars.insert(cs.begin(), cs.end());
    cs.emplace_back(kEndOfWord);
    words.emplace_back(std::move(cs), f);
  }
  const std::size_t base = Specials::kCount + 1 + chars.size();
  if (vocab_size < base) {
    throw BpeError("train_bpe: vocab_size " + std::to_string(vocab_size) + " must exceed the " +
                   std::to_string(base - 1) + " base symbols (alphabet, end-of-word marker and specials)");
  }

  std::vector<std::pair<std::string, std::string>> merges;
  while (base + merges.size() < vocab_size) {
    std::map<std::pair<std::string, std::string>, std::size_t> pairs;
    for (const auto& [w, f] : words) {
      for (std::size_t i = 0; i + 1 < w.size(); ++i) pairs[{w[i], w[i + 1]}] += f;
    }
    // std::map iterates in lexicographic order, so the first maximum wins ties.
    const std::pair<const std::pair<std::string, std::string>, std::size_t>* best = nullptr;
    for (const auto& entry : pairs) {
      if (best == nullptr || entry.second > best->second) best = &entry;
    }
    if (best == nullptr || best->second < 2) break;
    auto merge = best->first;
    for (auto& [w, f] : words) apply_merge(w, merge.first, merge.second);
    merges.push_back(std::move(merge));
  }
  return BpeModel(std::vector<std::string>(chars.begin(), chars.end()), std::move(merges));
}

std::vector<std::string> BpeModel::segment(const std::string& word) const {
  Word w;
  for (auto& c : utf8_chars(word)) {
    if (std::binary_search(alphabet_.begin(), alphabet_.end(), c)) {
      w.push_back(std::move(c));
    } else {
      w.emplace_back(symbols_[Specials::kUnk]);
    }
  }
  w.emplace_back(kEndOfWord);
  while (w.size() > 1) {
    std::size_t best_rank = merges_.size();
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
      auto it = rank_.find({w[i], w[i + 1]});
      if (it != rank_.end() && it->second < best_rank) best_rank = it->second;
    }
    if (best_rank == merges_.size()) break;
    apply_merge(w, merges_[best_rank].first, merges_[best_rank].second);
  }
  return w;
}

IdSeq BpeModel::encode(const TokenSeq& tokens) const {
  IdSeq out;
  for (const auto& t : tokens) {
    for (const auto& piece : segment(t)) out.push_back(id_of(piece));
  }
  return out;
}

TokenSeq BpeModel::decode(std::span<const TokenId> ids) const {
  static const std::string kEow = kEndOfWord;
  TokenSeq out;
  std::string cur;
  for (auto id : ids) {
    if (id >= symbols_.size()) throw BpeError("decode: id " + std::to_string(id) + " out of range");
    if (Specials::is_special(id)) continue;
    const auto& s = symbols_[id];
    if (s.size() >= kEow.size() && s.compare(s.size() - kEow.size(), kEow.size(), kEow) == 0) {
      cur.append(s, 0, s.size() - kEow.size());
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += s;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string BpeModel::serialize() const {
  std::ostringstream os;
  os << "bpe-v1 " << vocab_size();
  for (const auto& c : alphabet_) os << ' ' << c;
  os << '\n';
  for (const auto& [a, b] : merges_) os << a << ' ' << b << '\n';
  return os.str();
}

BpeModel BpeModel::deserialize(const std::string& text) {
  std::istringstream is(text);
  std::string header;
  if (!std::getline(is, header)) throw BpeError("bpe model: missing header");
  std::istringstream hs(header);
  std::string magic;
  std::size_t declared = 0;
  if (!(hs >> magic >> declared) || magic != "bpe-v1") throw BpeError("bpe model: bad header");
  std::vector<std::string> alphabet;
  std::string c;
  while (hs >> c) alphabet.push_back(c);
  std::vector<std::pair<std::string, std::string>> merges;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto sp = line.find(' ');
    if (sp == std::string::npos || sp == 0 || sp + 1 >= line.size()) throw BpeError("bpe model: bad merge line: " + line);
    merges.emplace_back(line.substr(0, sp), line.substr(sp + 1));
  }
  BpeModel m(std::move(alphabet), std::move(merges));
  if (m.vocab_size() != declared) {
    throw BpeError("bpe model: header declares " + std::to_string(declared) + " symbols, file yields " +
                   std::to_string(m.vocab_size()));
  }
  return m;
}

void BpeModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw BpeError("cannot write " + path);
  out << serialize();
}

BpeModel BpeModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BpeError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

}  // namespace ct
