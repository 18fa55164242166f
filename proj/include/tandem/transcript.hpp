#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tandem {

// Milliseconds from session start.
using Millis = std::int64_t;

// Label given to cues whose payload carries no "Name: " prefix.
inline constexpr std::string_view kUnknownSpeaker = "?";

struct RawCue {
  std::optional<std::int64_t> index;  // cue-number line, when numeric
  Millis start_ms = 0;
  Millis end_ms = 0;
  std::string speaker{kUnknownSpeaker};
  std::string text;

  Millis duration() const { return end_ms - start_ms; }
  bool operator==(const RawCue&) const = default;
};

struct Transcript {
  std::string source_name;
  std::vector<RawCue> cues;
  // Distinct labels in order of first appearance in `cues`.
  std::vector<std::string> speakers;
  Millis duration_ms = 0;

  bool operator==(const Transcript&) const = default;
};

enum class Severity { kWarning, kError };

struct ParseIssue {
  int line_number = 0;  // 1-based; 0 when the issue has no source line
  Severity severity = Severity::kWarning;
  std::string message;

  bool operator==(const ParseIssue&) const = default;
};

struct ParseResult {
  Transcript transcript;
  std::vector<ParseIssue> issues;

  bool has_errors() const;
};

// Parses a WebVTT document (Zoom dialect or generic). Never throws on
// malformed input; problems are reported as issues.
ParseResult parse_vtt(std::string_view input, std::string source_name = {});

// Canonical form: "WEBVTT", blank line, then numbered cues with
// "HH:MM:SS.mmm --> HH:MM:SS.mmm" and "Speaker: text" payloads.
std::string serialize_vtt(const Transcript& transcript);

// "H*:MM:SS.mmm" or "MM:SS.mmm". Returns nullopt on any deviation.
std::optional<Millis> parse_timestamp(std::string_view text);

// Hours are zero-padded to at least two digits.
std::string format_timestamp(Millis ms);

// Replaces speaker labels found in `alias_map`. Keys match ignoring case and
// whitespace differences. Throws std::invalid_argument if a canonical label
// is empty or one normalized key maps to two different labels.
Transcript normalize_speakers(const Transcript& transcript,
                              const std::map<std::string, std::string>& alias_map);

// Content sanity report over an already-parsed transcript.
std::vector<ParseIssue> validate(const Transcript& transcript);

// Rebuilds `speakers` and `duration_ms` from `cues`.
void refresh_derived_fields(Transcript& transcript);

// Thresholds applied by validate().
inline constexpr double kMaxUnknownSpeakerRatio = 0.40;
inline constexpr Millis kOverlongCueMs = 120'000;
inline constexpr double kMinSpeechCoverage = 0.05;

}  // namespace tandem
