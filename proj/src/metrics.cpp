#include "tandem/metrics.hpp"

#include <algorithm>

#include "tandem/text.hpp"

namespace tandem {

Millis& LanguageBreakdown::operator[](Language lang) {
  switch (lang) {
    case Language::kFr: return fr;
    case Language::kEn: return en;
    case Language::kUnknown: break;
  }
  return unknown;
}

std::int64_t FlowMatrix::total() const {
  std::int64_t sum = 0;
  for (const auto& row : counts) {
    for (auto c : row) sum += c;
  }
  return sum;
}

int FlowMatrix::index_of(std::string_view speaker) const {
  auto it = std::find(speakers.begin(), speakers.end(), speaker);
  return it == speakers.end() ? -1 : static_cast<int>(it - speakers.begin());
}

std::int64_t count_filled_pauses(std::string_view text, const AnalysisConfig& config) {
  std::int64_t n = 0;
  for (const auto& token : tokenize(text)) {
    if (config.filled_pause_lexicon.contains(token)) ++n;
  }
  return n;
}

std::map<std::string, SpeakerMetrics> compute_speaker_metrics(const TurnSequence& seq,
                                                              const AnalysisConfig& config) {
  std::map<std::string, SpeakerMetrics> out;
  std::map<std::string, Millis> floor_span_sum;
  Millis total = 0;

  for (const auto& turn : seq.turns) {
    auto& m = out[turn.speaker];
    m.speaker = turn.speaker;
    m.speaking_ms += turn.speech_ms;
    total += turn.speech_ms;
    m.word_count += static_cast<std::int64_t>(turn.word_count);
    m.filled_pause_count += count_filled_pauses(turn.text, config);
    m.language_ms[classify_language(turn.text)] += turn.speech_ms;
    if (turn.kind == TurnKind::kBackchannel) {
      ++m.backchannel_count;
    } else {
      ++m.floor_turn_count;
      floor_span_sum[turn.speaker] += turn.duration();
      m.longest_floor_turn_ms = std::max(m.longest_floor_turn_ms, turn.duration());
    }
  }

  for (const auto& gap : seq.gaps) {
    if (gap.duration() < config.long_pause_ms || !gap.before_speaker) continue;
    if (auto it = out.find(*gap.before_speaker); it != out.end()) {
      ++it->second.long_pauses_after;
    }
  }

  for (auto& [speaker, m] : out) {
    m.share = total > 0 ? static_cast<double>(m.speaking_ms) / static_cast<double>(total) : 0.0;
    if (m.floor_turn_count > 0) {
      m.mean_floor_turn_ms = static_cast<double>(floor_span_sum[speaker]) /
                             static_cast<double>(m.floor_turn_count);
    }
    if (m.speaking_ms > 0) {
      m.words_per_minute = static_cast<double>(m.word_count) /
                           (static_cast<double>(m.speaking_ms) / 60000.0);
    }
  }
  return out;
}

FlowMatrix compute_flow(const TurnSequence& seq) {
  FlowMatrix flow;
  for (const auto& turn : seq.turns) flow.speakers.push_back(turn.speaker);
  std::sort(flow.speakers.begin(), flow.speakers.end());
  flow.speakers.erase(std::unique(flow.speakers.begin(), flow.speakers.end()),
                      flow.speakers.end());
  const auto n = flow.speakers.size();
  flow.counts.assign(n, std::vector<std::int64_t>(n, 0));

  int previous = -1;
  for (const auto& turn : seq.turns) {
    if (turn.kind != TurnKind::kFloor) continue;
    int current = flow.index_of(turn.speaker);
    if (previous >= 0) ++flow.counts[previous][current];
    previous = current;
  }
  return flow;
}

SessionMetrics compute_session_metrics(const Transcript& transcript,
                                       const AnalysisConfig& config) {
  SessionMetrics metrics;
  metrics.config_used = config;
  metrics.session_duration_ms = transcript.duration_ms;

  auto seq = classify_backchannels(segment_turns(transcript, config), config);
  metrics.long_pause_count = static_cast<std::int64_t>(detect_long_pauses(seq, config).size());
  metrics.per_speaker = compute_speaker_metrics(seq, config);
  metrics.flow = compute_flow(seq);
  for (const auto& [_, m] : metrics.per_speaker) metrics.total_speaking_ms += m.speaking_ms;
  return metrics;
}

}  // namespace tandem
