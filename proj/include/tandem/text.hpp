#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace tandem {

// Minimal tokenizer shared by every lexicon lookup in the engine:
// split on ASCII whitespace, strip leading/trailing punctuation, lowercase.
// Tokens that are punctuation only vanish. The typographic apostrophe
// (U+2019) is folded to '\'' so "c’est" and "c'est" compare equal.
std::vector<std::string> tokenize(std::string_view text);

// Count of whitespace-separated tokens, punctuation included.
std::size_t count_words(std::string_view text);

// ASCII lowercase plus the Latin-1 supplement capitals (À..Þ) in UTF-8.
std::string to_lower(std::string_view text);

std::string_view trim(std::string_view text);

// Trims and collapses interior whitespace runs to one space.
std::string collapse_whitespace(std::string_view text);

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

}  // namespace tandem
