#include "tandem/text.hpp"

#include <array>
#include <cctype>

namespace tandem {
namespace {

// Multi-byte punctuation that shows up in exported captions.
constexpr std::array<std::string_view, 12> kUtf8Punctuation = {
    "…", "«", "»", "“", "”", "‘",
    "’", "¿", "¡", "\xE2\x80\x93", "\xE2\x80\x94", "\xC2\xA0"};

bool is_ascii_punct(char c) {
  return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

// Length of the punctuation sequence at the front of `s`, 0 if none.
std::size_t punct_prefix(std::string_view s) {
  if (s.empty()) return 0;
  if (is_ascii_punct(s.front())) return 1;
  for (auto p : kUtf8Punctuation) {
    if (s.starts_with(p)) return p.size();
  }
  return 0;
}

std::size_t punct_suffix(std::string_view s) {
  if (s.empty()) return 0;
  if (is_ascii_punct(s.back())) return 1;
  for (auto p : kUtf8Punctuation) {
    if (s.ends_with(p)) return p.size();
  }
  return 0;
}

std::string fold_apostrophes(std::string_view s) {
  constexpr std::string_view kRightQuote = "’";
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    if (s.substr(i).starts_with(kRightQuote)) {
      out.push_back('\'');
      i += kRightQuote.size();
    } else {
      out.push_back(s[i++]);
    }
  }
  return out;
}

}  // namespace

std::string_view trim(std::string_view text) {
  std::size_t b = 0;
  std::size_t e = text.size();
  while (b < e && is_space(text[b])) ++b;
  while (e > b && is_space(text[e - 1])) --e;
  return text.substr(b, e - b);
}

std::string collapse_whitespace(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : trim(text)) {
    if (is_space(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::string to_lower(std::string_view text) {
  std::string out(text);
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto c = static_cast<unsigned char>(out[i]);
    if (c < 0x80) {
      out[i] = static_cast<char>(std::tolower(c));
    } else if (c == 0xC3 && i + 1 < out.size()) {
      auto next = static_cast<unsigned char>(out[i + 1]);
      // U+00C0..U+00DE map to U+00E0..U+00FE, except U+00D7 (multiplication).
      if (next >= 0x80 && next <= 0x9E && next != 0x97) {
        out[i + 1] = static_cast<char>(next + 0x20);
      }
      ++i;
    }
  }
  return out;
}

std::size_t count_words(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : text) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++n;
    }
  }
  return n;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    std::string_view raw = text.substr(start, i - start);
    while (auto n = punct_prefix(raw)) raw.remove_prefix(n);
    while (auto n = punct_suffix(raw)) raw.remove_suffix(n);
    if (raw.empty()) continue;
    tokens.push_back(to_lower(fold_apostrophes(raw)));
  }
  return tokens;
}

}  // namespace tandem
