#include "tandem/timeline.hpp"

#include <algorithm>
#include <stdexcept>

namespace tandem {

std::vector<TimelineTrack> build_timeline(const TurnSequence& seq,
                                          const std::vector<std::string>& speaker_order) {
  return build_timeline(seq, speaker_order, {});
}

std::vector<TimelineTrack> build_timeline(const TurnSequence& seq,
                                          const std::vector<std::string>& speaker_order,
                                          const std::map<std::string, int>& colour_keys) {
  std::vector<TimelineTrack> tracks;
  std::map<std::string_view, std::size_t> slot;
  for (const auto& label : speaker_order) {
    if (slot.contains(label)) continue;
    TimelineTrack track;
    track.speaker = label;
    auto key = colour_keys.find(label);
    track.speaker_index =
        key != colour_keys.end() ? key->second : static_cast<int>(tracks.size());
    slot.emplace(label, tracks.size());
    tracks.push_back(std::move(track));
  }

  for (const auto& turn : seq.turns) {
    auto it = slot.find(turn.speaker);
    if (it == slot.end()) {
      throw std::invalid_argument("speaker '" + turn.speaker + "' missing from speaker order");
    }
    tracks[it->second].segments.push_back({turn.start_ms, turn.end_ms, turn.kind});
  }
  for (auto& track : tracks) {
    std::sort(track.segments.begin(), track.segments.end(),
              [](const TimelineSegment& a, const TimelineSegment& b) {
                return a.start_ms < b.start_ms;
              });
  }
  return tracks;
}

SeekResult seek(const Transcript& transcript, Millis t_ms) {
  if (t_ms < 0) throw std::invalid_argument("seek instant must be >= 0");
  const auto& cues = transcript.cues;
  SeekResult result;
  result.offset_ms = std::min(t_ms, transcript.duration_ms);

  // Cues are sorted by start, so the first hit is the earliest-starting one.
  auto after = std::partition_point(cues.begin(), cues.end(),
                                    [&](const RawCue& c) { return c.start_ms < t_ms; });
  for (auto it = cues.begin(); it != after; ++it) {
    if (it->end_ms > t_ms) {
      result.active_cue = static_cast<std::size_t>(it - cues.begin());
      break;
    }
  }
  // A cue starting exactly at t is active too, unless an earlier one is.
  if (!result.active_cue && after != cues.end() && after->start_ms == t_ms) {
    result.active_cue = static_cast<std::size_t>(after - cues.begin());
  }
  if (after != cues.end()) result.next_cue = static_cast<std::size_t>(after - cues.begin());
  return result;
}

}  // namespace tandem
