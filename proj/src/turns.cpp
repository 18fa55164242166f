#include "tandem/turns.hpp"

#include <algorithm>
#include <limits>
#include <map>

#include "tandem/text.hpp"

namespace tandem {
namespace {

constexpr auto kNone = std::numeric_limits<std::size_t>::max();

void compute_gaps(const Transcript& transcript, const AnalysisConfig& config,
                  std::vector<Gap>& gaps) {
  const auto& cues = transcript.cues;
  if (cues.empty()) return;
  Millis reach = cues.front().end_ms;
  const std::string* reach_speaker = &cues.front().speaker;
  for (std::size_t i = 1; i < cues.size(); ++i) {
    const auto& cue = cues[i];
    if (cue.start_ms > reach) {
      Gap gap;
      gap.start_ms = reach;
      gap.end_ms = cue.start_ms;
      gap.before_speaker = *reach_speaker;
      gap.after_speaker = cue.speaker;
      gap.is_long = gap.duration() >= config.long_pause_ms;
      gaps.push_back(std::move(gap));
    }
    // Ties go to the later cue: it is the one that was still talking.
    if (cue.end_ms >= reach) {
      reach = cue.end_ms;
      reach_speaker = &cue.speaker;
    }
  }
}

}  // namespace

TurnSequence segment_turns(const Transcript& transcript, const AnalysisConfig& config) {
  TurnSequence seq;
  seq.duration_ms = transcript.duration_ms;

  std::map<std::string, Millis, std::less<>> reach;
  std::map<std::string, std::size_t, std::less<>> latest_turn;
  std::size_t current = kNone;

  const auto& cues = transcript.cues;
  for (std::size_t i = 0; i < cues.size(); ++i) {
    const auto& cue = cues[i];
    Millis start = cue.start_ms;
    auto r = reach.find(cue.speaker);
    if (r != reach.end()) start = std::max(start, r->second);
    const bool covered = cue.end_ms <= start;
    const Millis speech = covered ? 0 : cue.end_ms - start;

    std::size_t target = kNone;
    if (current != kNone && seq.turns[current].speaker == cue.speaker &&
        (covered || start - seq.turns[current].end_ms <= config.merge_gap_ms)) {
      target = current;
    } else if (covered) {
      target = latest_turn.at(cue.speaker);
    }

    if (target == kNone) {
      Turn turn;
      turn.speaker = cue.speaker;
      turn.start_ms = start;
      turn.end_ms = cue.end_ms;
      seq.turns.push_back(std::move(turn));
      target = seq.turns.size() - 1;
    }
    auto& turn = seq.turns[target];
    turn.end_ms = std::max(turn.end_ms, cue.end_ms);
    turn.speech_ms += speech;
    turn.cue_indices.push_back(i);
    turn.word_count += count_words(cue.text);
    if (!turn.text.empty()) turn.text.push_back(' ');
    turn.text += cue.text;

    if (r == reach.end()) {
      reach.emplace(cue.speaker, cue.end_ms);
    } else {
      r->second = std::max(r->second, cue.end_ms);
    }
    latest_turn[cue.speaker] = target;
    current = target;
  }

  std::stable_sort(seq.turns.begin(), seq.turns.end(), [](const Turn& a, const Turn& b) {
    if (a.start_ms != b.start_ms) return a.start_ms < b.start_ms;
    if (a.end_ms != b.end_ms) return a.end_ms < b.end_ms;
    return a.cue_indices.front() < b.cue_indices.front();
  });
  compute_gaps(transcript, config, seq.gaps);
  return seq;
}

bool is_backchannel_candidate(const Turn& turn, const AnalysisConfig& config) {
  if (turn.duration() > config.backchannel_max_ms) return false;
  if (turn.word_count > static_cast<std::size_t>(config.backchannel_max_tokens)) {
    return false;
  }
  auto tokens = tokenize(turn.text);
  if (tokens.empty()) return false;
  return std::all_of(tokens.begin(), tokens.end(), [&](const std::string& t) {
    return config.backchannel_lexicon.contains(t);
  });
}

TurnSequence classify_backchannels(TurnSequence seq, const AnalysisConfig& config) {
  auto& turns = seq.turns;
  Millis longest = 0;
  for (auto& turn : turns) {
    turn.kind = TurnKind::kFloor;
    longest = std::max(longest, turn.duration());
  }

  const Millis slack = config.merge_gap_ms;
  for (std::size_t k = 1; k < turns.size(); ++k) {
    auto& turn = turns[k];
    if (!is_backchannel_candidate(turn, config)) continue;

    const Millis lo = turn.start_ms - slack;
    const Millis hi = turn.end_ms + slack;
    auto responds_to = [&](const Turn& other) {
      return other.speaker != turn.speaker && other.start_ms <= hi && other.end_ms >= lo;
    };
    bool adjoined = false;
    for (std::size_t j = k + 1; j < turns.size() && turns[j].start_ms <= hi && !adjoined; ++j) {
      adjoined = responds_to(turns[j]);
    }
    // Turns starting before lo - longest cannot reach lo.
    for (std::size_t j = k; j-- > 0 && turns[j].start_ms >= lo - longest && !adjoined;) {
      adjoined = responds_to(turns[j]);
    }
    if (adjoined) turn.kind = TurnKind::kBackchannel;
  }
  return seq;
}

std::vector<Gap> detect_long_pauses(const TurnSequence& seq, const AnalysisConfig& config) {
  std::vector<Gap> out;
  for (const auto& gap : seq.gaps) {
    if (gap.duration() >= config.long_pause_ms) {
      out.push_back(gap);
      out.back().is_long = true;
    }
  }
  return out;
}

}  // namespace tandem
