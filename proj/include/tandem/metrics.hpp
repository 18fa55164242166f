#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tandem/analysis_config.hpp"
#include "tandem/language.hpp"
#include "tandem/turns.hpp"

namespace tandem {

struct LanguageBreakdown {
  Millis fr = 0;
  Millis en = 0;
  Millis unknown = 0;

  Millis total() const { return fr + en + unknown; }
  Millis& operator[](Language lang);
  bool operator==(const LanguageBreakdown&) const = default;
};

struct SpeakerMetrics {
  std::string speaker;
  Millis speaking_ms = 0;
  double share = 0.0;
  std::int64_t floor_turn_count = 0;
  std::int64_t backchannel_count = 0;
  double mean_floor_turn_ms = 0.0;
  Millis longest_floor_turn_ms = 0;
  std::int64_t word_count = 0;
  double words_per_minute = 0.0;
  std::int64_t filled_pause_count = 0;
  std::int64_t long_pauses_after = 0;
  LanguageBreakdown language_ms;

  bool operator==(const SpeakerMetrics&) const = default;
};

// counts[i][j]: floor transitions from speakers[i] to speakers[j].
struct FlowMatrix {
  std::vector<std::string> speakers;
  std::vector<std::vector<std::int64_t>> counts;

  std::int64_t total() const;
  // Row index of `speaker`, or -1.
  int index_of(std::string_view speaker) const;
  bool operator==(const FlowMatrix&) const = default;
};

struct SessionMetrics {
  std::map<std::string, SpeakerMetrics> per_speaker;
  FlowMatrix flow;
  Millis total_speaking_ms = 0;
  Millis session_duration_ms = 0;
  std::int64_t long_pause_count = 0;
  AnalysisConfig config_used;

  bool operator==(const SessionMetrics&) const = default;
};

// Per-speaker individual metrics. Floor-turn means and maxima use the turn
// span (end - start); speaking time uses speech_ms. Expects backchannels to
// have been classified already.
std::map<std::string, SpeakerMetrics> compute_speaker_metrics(const TurnSequence& seq,
                                                              const AnalysisConfig& config);

// Who-speaks-after-whom over floor turns only; backchannels are skipped.
// Rows and columns follow sorted speaker labels and include every speaker
// with at least one turn.
FlowMatrix compute_flow(const TurnSequence& seq);

std::int64_t count_filled_pauses(std::string_view text, const AnalysisConfig& config);

// segment -> classify backchannels -> long pauses -> speaker metrics -> flow.
SessionMetrics compute_session_metrics(const Transcript& transcript,
                                       const AnalysisConfig& config);

}  // namespace tandem
