#pragma once

#include <set>
#include <string>
#include <string_view>

namespace tandem {

enum class Language { kFr, kEn, kUnknown };

std::string_view to_string(Language lang);

// Stopword vote over the minimal tokenizer's output; a tie (including 0-0)
// is kUnknown.
Language classify_language(std::string_view text);

const std::set<std::string>& french_stopwords();
const std::set<std::string>& english_stopwords();

}  // namespace tandem
