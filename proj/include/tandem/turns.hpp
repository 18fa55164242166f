#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tandem/analysis_config.hpp"
#include "tandem/transcript.hpp"

namespace tandem {

enum class TurnKind { kFloor, kBackchannel };

// A maximal run of one speaker's consecutive cues.
struct Turn {
  std::string speaker;
  Millis start_ms = 0;
  Millis end_ms = 0;
  // Sum of constituent cue durations after same-speaker overlap clipping;
  // merged intra-turn silences are excluded.
  Millis speech_ms = 0;
  std::vector<std::size_t> cue_indices;
  std::size_t word_count = 0;
  TurnKind kind = TurnKind::kFloor;
  // Constituent cue texts joined with single spaces.
  std::string text;

  Millis duration() const { return end_ms - start_ms; }
  bool operator==(const Turn&) const = default;
};

// A maximal interval in which no cue is active.
struct Gap {
  Millis start_ms = 0;
  Millis end_ms = 0;
  std::optional<std::string> before_speaker;
  std::optional<std::string> after_speaker;
  bool is_long = false;

  Millis duration() const { return end_ms - start_ms; }
  bool operator==(const Gap&) const = default;
};

struct TurnSequence {
  std::vector<Turn> turns;  // ordered by start_ms
  std::vector<Gap> gaps;    // ordered by start_ms
  Millis duration_ms = 0;

  bool operator==(const TurnSequence&) const = default;
};

// Merges same-speaker cues separated by at most merge_gap_ms into turns.
// A cue of another speaker in between always closes the turn. When a cue
// overlaps earlier speech by the same speaker, its start is clipped to the
// end of that speech; a cue covered entirely is folded into the speaker's
// latest turn with zero added speech. All turns start as kFloor.
TurnSequence segment_turns(const Transcript& transcript, const AnalysisConfig& config);

// Marks short lexicon-only turns that overlap or adjoin another speaker's
// turn as backchannels. Kinds are recomputed from scratch, so applying this
// twice gives the same result as applying it once.
TurnSequence classify_backchannels(TurnSequence seq, const AnalysisConfig& config);

bool is_backchannel_candidate(const Turn& turn, const AnalysisConfig& config);

std::vector<Gap> detect_long_pauses(const TurnSequence& seq, const AnalysisConfig& config);

}  // namespace tandem
