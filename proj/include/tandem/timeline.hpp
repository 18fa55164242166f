#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tandem/transcript.hpp"
#include "tandem/turns.hpp"

namespace tandem {

struct TimelineSegment {
  Millis start_ms = 0;
  Millis end_ms = 0;
  TurnKind kind = TurnKind::kFloor;

  bool operator==(const TimelineSegment&) const = default;
};

// Speech-activity bars for one speaker. speaker_index is the colour key.
struct TimelineTrack {
  std::string speaker;
  int speaker_index = 0;
  std::vector<TimelineSegment> segments;

  bool operator==(const TimelineTrack&) const = default;
};

struct SeekResult {
  Millis offset_ms = 0;
  std::optional<std::size_t> active_cue;
  std::optional<std::size_t> next_cue;

  bool operator==(const SeekResult&) const = default;
};

// One track per label of `speaker_order`, in that order; speaker_index is
// the label's position. Throws std::invalid_argument when a turn's speaker
// is missing from the order.
std::vector<TimelineTrack> build_timeline(const TurnSequence& seq,
                                          const std::vector<std::string>& speaker_order);

// As above, with colour keys supplied per label so they stay stable across
// sessions; labels absent from `colour_keys` fall back to their position.
std::vector<TimelineTrack> build_timeline(const TurnSequence& seq,
                                          const std::vector<std::string>& speaker_order,
                                          const std::map<std::string, int>& colour_keys);

// Maps an instant to a playback position. Throws std::invalid_argument for
// negative instants.
SeekResult seek(const Transcript& transcript, Millis t_ms);

}  // namespace tandem
