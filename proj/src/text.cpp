#include "scorehub/text.hpp"

#include <algorithm>

#include "scorehub/error.hpp"

namespace scorehub {

namespace {

bool is_separator(unsigned char c) {
  if (c >= 0x80) return false;
  if (c == '_') return false;
  return std::isspace(c) || std::ispunct(c);
}

bool has_regex_syntax(std::string_view entry) {
  return entry.find_first_of(".*+?[](){}|^$\\") != std::string_view::npos;
}

}  // namespace

std::string ascii_lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c);
  });
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (is_separator(c)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::size_t char_count(std::string_view text) {
  return static_cast<std::size_t>(
      std::count_if(text.begin(), text.end(), [](char ch) {
        return (static_cast<unsigned char>(ch) & 0xC0) != 0x80;
      }));
}

Lexicon::Lexicon(std::vector<std::string> entries) : entries_(std::move(entries)) {
  for (const auto& entry : entries_) {
    if (entry.empty()) continue;
    if (has_regex_syntax(entry)) {
      try {
        patterns_.emplace_back(ascii_lower(entry),
                               std::regex::ECMAScript | std::regex::icase |
                                   std::regex::optimize);
      } catch (const std::regex_error& e) {
        throw Error(ErrorCode::kInvalidParams,
                    "bad lexicon pattern '" + entry + "': " + e.what());
      }
    } else {
      words_.insert(ascii_lower(entry));
    }
  }
}

bool Lexicon::matches(std::string_view token) const {
  std::string lowered = ascii_lower(token);
  if (words_.count(lowered)) return true;
  return std::any_of(patterns_.begin(), patterns_.end(), [&](const auto& re) {
    return std::regex_match(lowered, re);
  });
}

std::size_t informal_word_count(std::string_view text, const Lexicon& lexicon) {
  if (lexicon.empty()) return 0;
  std::size_t count = 0;
  for (const auto& token : tokenize(text)) {
    if (lexicon.matches(token)) ++count;
  }
  return count;
}

}  // namespace scorehub
