#include "tandem/language.hpp"

#include "tandem/text.hpp"

namespace tandem {

// The two lists are disjoint. Spellings shared by both languages ("a",
// "on", "me") are kept on the English side only.
const std::set<std::string>& french_stopwords() {
  static const std::set<std::string> words = {
      "je",   "tu",    "il",    "elle",   "nous",  "vous",  "ils",   "elles",
      "le",   "la",    "les",   "un",     "une",   "des",   "de",    "du",
      "et",   "ou",    "mais",  "donc",   "que",   "qui",   "quoi",  "est",
      "c'est", "sont", "suis",  "es",     "en",    "se",    "lui",   "nos",
      "pas",  "ne",    "qu'il", "ce",     "cette", "ces",   "mon",   "ma",
      "mes",  "ton",   "ta",    "tes",    "son",   "sa",    "ses",   "notre",
      "votre", "leur", "dans",  "pour",   "avec",  "sur",   "au",    "aux",
      "très", "aussi", "j'ai",  "vos",   "y",     "ça",    "moi",   "toi",
      "oui",  "non",   "comme", "quand",  "parce", "peut",  "fait",  "être",
      "à",    "tout",  "tous",  "bien",
  };
  return words;
}

const std::set<std::string>& english_stopwords() {
  static const std::set<std::string> words = {
      "the",   "a",     "an",    "i",     "you",   "he",    "she",   "we",
      "they",  "it",    "is",    "are",   "was",   "were",  "be",    "been",
      "am",    "and",   "or",    "but",   "so",    "that",  "this",  "these",
      "those", "of",    "to",    "in",    "on",    "at",    "for",   "with",
      "not",   "no",    "yes",   "do",    "does",  "did",   "have",  "has",
      "had",   "my",    "your",  "his",   "her",   "our",   "their", "what",
      "which", "who",   "when",  "where", "why",   "how",   "it's",  "i'm",
      "don't", "can",   "will",  "would", "there", "about", "just",  "me",
      "because", "if",  "from",  "very",
  };
  return words;
}

std::string_view to_string(Language lang) {
  switch (lang) {
    case Language::kFr: return "fr";
    case Language::kEn: return "en";
    case Language::kUnknown: break;
  }
  return "unknown";
}

Language classify_language(std::string_view text) {
  const auto& fr = french_stopwords();
  const auto& en = english_stopwords();
  int score_fr = 0;
  int score_en = 0;
  for (const auto& token : tokenize(text)) {
    if (fr.contains(token)) ++score_fr;
    if (en.contains(token)) ++score_en;
  }
  if (score_fr > score_en) return Language::kFr;
  if (score_en > score_fr) return Language::kEn;
  return Language::kUnknown;
}

}  // namespace tandem
