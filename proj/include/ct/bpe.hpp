#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ct/text.hpp"

namespace ct {

using TokenId = std::uint32_t;
using IdSeq = std::vector<TokenId>;

class BpeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reserved ids, identical in every model.
struct Specials {
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kUnk = 3;
  static constexpr TokenId kSep = 4;
  static constexpr TokenId kCount = 5;
  static bool is_special(TokenId id) { return id < kCount; }
};

/// End-of-word-marker byte-pair codec. Vocabulary layout: specials, the
/// end-of-word marker, the sorted base alphabet (UTF-8 code points), then one
/// symbol per merge in priority order.
class BpeModel {
 public:
  static constexpr const char* kEndOfWord = "</w>";

  BpeModel() = default;
  BpeModel(std::vector<std::string> alphabet, std::vector<std::pair<std::string, std::string>> merges);

  /// Greedy most-frequent-pair merging over words (ties: lexicographically
  /// smallest pair) until `vocab_size` symbols exist or no pair occurs twice.
  static BpeModel train(std::span<const TokenSeq> corpus, std::size_t vocab_size);

  IdSeq encode(const TokenSeq& tokens) const;
  /// Pieces for one word, before id lookup.
  std::vector<std::string> segment(const std::string& word) const;
  /// Inverse of encode; specials are dropped. Throws on ids out of range.
  TokenSeq decode(std::span<const TokenId> ids) const;

  std::size_t vocab_size() const { return symbols_.size(); }
  const std::vector<std::pair<std::string, std::string>>& merges() const { return merges_; }
  const std::vector<std::string>& alphabet() const { return alphabet_; }
  const std::string& symbol(TokenId id) const { return symbols_.at(id); }
  TokenId id_of(const std::string& symbol) const;

  void save(const std::string& path) const;
  static BpeModel load(const std::string& path);
  std::string serialize() const;
  static BpeModel deserialize(const std::string& text);

  bool operator==(const BpeModel& other) const {
    return alphabet_ == other.alphabet_ && merges_ == other.merges_;
  }

 private:
  std::vector<std::string> alphabet_;
  std::vector<std::pair<std::string, std::string>> merges_;
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, TokenId> ids_;
  std::map<std::pair<std::string, std::string>, std::size_t> rank_;
};

/// Splits UTF-8 text into code points (invalid bytes become single units).
std::vector<std::string> utf8_chars(std::string_view s);

}  // namespace ct
