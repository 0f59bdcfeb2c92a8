#pragma once

#include <regex>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace scorehub {

// Splits on ASCII whitespace and punctuation and lowercases ASCII letters.
// Bytes >= 0x80 are kept inside tokens so UTF-8 words survive intact.
std::vector<std::string> tokenize(std::string_view text);

// Number of UTF-8 code points.
std::size_t char_count(std::string_view text);

std::string ascii_lower(std::string_view text);

// A per-context word list. Plain entries match whole tokens
// case-insensitively; entries containing regex metacharacters
// (e.g. "hahaha+") must match a whole token as an ECMAScript regex.
class Lexicon {
 public:
  Lexicon() = default;
  explicit Lexicon(std::vector<std::string> entries);

  const std::vector<std::string>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  bool matches(std::string_view token) const;

 private:
  std::vector<std::string> entries_;
  std::unordered_set<std::string> words_;
  std::vector<std::regex> patterns_;
};

// Count of tokens of `text` matched by `lexicon`.
std::size_t informal_word_count(std::string_view text, const Lexicon& lexicon);

}  // namespace scorehub
