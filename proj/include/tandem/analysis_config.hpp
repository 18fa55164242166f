#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>

#include "tandem/transcript.hpp"

namespace tandem {

// Thresholds and lexicons for turn segmentation and classification.
struct AnalysisConfig {
  Millis merge_gap_ms = 1000;
  Millis long_pause_ms = 3000;
  Millis backchannel_max_ms = 1500;
  int backchannel_max_tokens = 2;
  std::set<std::string> backchannel_lexicon = default_backchannel_lexicon();
  std::set<std::string> filled_pause_lexicon = default_filled_pause_lexicon();

  static std::set<std::string> default_backchannel_lexicon();
  static std::set<std::string> default_filled_pause_lexicon();

  bool operator==(const AnalysisConfig&) const = default;
};

// Throws std::invalid_argument naming the first violated invariant.
void check_config(const AnalysisConfig& config);

// Reads a flat JSON object whose keys are the AnalysisConfig field names.
// Absent keys keep their defaults; unknown keys are rejected. Lexicon
// entries are lowercased on load.
AnalysisConfig parse_config(std::string_view json_text);
AnalysisConfig load_config(const std::filesystem::path& path);

}  // namespace tandem
