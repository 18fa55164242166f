#include "tandem/json_io.hpp"

#include <stdexcept>

namespace tandem {

std::string_view to_string(TurnKind kind) {
  return kind == TurnKind::kBackchannel ? "backchannel" : "floor";
}

std::string_view to_string(Severity severity) {
  return severity == Severity::kError ? "error" : "warning";
}

void to_json(Json& j, const AnalysisConfig& config) {
  j = Json{{"merge_gap_ms", config.merge_gap_ms},
           {"long_pause_ms", config.long_pause_ms},
           {"backchannel_max_ms", config.backchannel_max_ms},
           {"backchannel_max_tokens", config.backchannel_max_tokens},
           {"backchannel_lexicon", config.backchannel_lexicon},
           {"filled_pause_lexicon", config.filled_pause_lexicon}};
}

void from_json(const Json& j, AnalysisConfig& config) {
  j.at("merge_gap_ms").get_to(config.merge_gap_ms);
  j.at("long_pause_ms").get_to(config.long_pause_ms);
  j.at("backchannel_max_ms").get_to(config.backchannel_max_ms);
  j.at("backchannel_max_tokens").get_to(config.backchannel_max_tokens);
  j.at("backchannel_lexicon").get_to(config.backchannel_lexicon);
  j.at("filled_pause_lexicon").get_to(config.filled_pause_lexicon);
}

void to_json(Json& j, const LanguageBreakdown& lang) {
  j = Json{{"fr", lang.fr}, {"en", lang.en}, {"unknown", lang.unknown}};
}

void from_json(const Json& j, LanguageBreakdown& lang) {
  j.at("fr").get_to(lang.fr);
  j.at("en").get_to(lang.en);
  j.at("unknown").get_to(lang.unknown);
}

void to_json(Json& j, const SpeakerMetrics& m) {
  j = Json{{"speaker", m.speaker},
           {"speaking_ms", m.speaking_ms},
           {"share", m.share},
           {"floor_turn_count", m.floor_turn_count},
           {"backchannel_count", m.backchannel_count},
           {"mean_floor_turn_ms", m.mean_floor_turn_ms},
           {"longest_floor_turn_ms", m.longest_floor_turn_ms},
           {"word_count", m.word_count},
           {"words_per_minute", m.words_per_minute},
           {"filled_pause_count", m.filled_pause_count},
           {"long_pauses_after", m.long_pauses_after},
           {"language_ms", m.language_ms}};
}

void from_json(const Json& j, SpeakerMetrics& m) {
  j.at("speaker").get_to(m.speaker);
  j.at("speaking_ms").get_to(m.speaking_ms);
  j.at("share").get_to(m.share);
  j.at("floor_turn_count").get_to(m.floor_turn_count);
  j.at("backchannel_count").get_to(m.backchannel_count);
  j.at("mean_floor_turn_ms").get_to(m.mean_floor_turn_ms);
  j.at("longest_floor_turn_ms").get_to(m.longest_floor_turn_ms);
  j.at("word_count").get_to(m.word_count);
  j.at("words_per_minute").get_to(m.words_per_minute);
  j.at("filled_pause_count").get_to(m.filled_pause_count);
  j.at("long_pauses_after").get_to(m.long_pauses_after);
  j.at("language_ms").get_to(m.language_ms);
}

void to_json(Json& j, const FlowMatrix& flow) {
  j = Json{{"speakers", flow.speakers}, {"counts", flow.counts}};
}

void from_json(const Json& j, FlowMatrix& flow) {
  j.at("speakers").get_to(flow.speakers);
  j.at("counts").get_to(flow.counts);
  if (flow.counts.size() != flow.speakers.size()) {
    throw std::invalid_argument("flow matrix is not square");
  }
  for (const auto& row : flow.counts) {
    if (row.size() != flow.speakers.size()) {
      throw std::invalid_argument("flow matrix is not square");
    }
  }
}

void to_json(Json& j, const SessionMetrics& metrics) {
  j = Json{{"per_speaker", metrics.per_speaker},
           {"flow", metrics.flow},
           {"total_speaking_ms", metrics.total_speaking_ms},
           {"session_duration_ms", metrics.session_duration_ms},
           {"long_pause_count", metrics.long_pause_count},
           {"config_used", metrics.config_used}};
}

void from_json(const Json& j, SessionMetrics& metrics) {
  j.at("per_speaker").get_to(metrics.per_speaker);
  j.at("flow").get_to(metrics.flow);
  j.at("total_speaking_ms").get_to(metrics.total_speaking_ms);
  j.at("session_duration_ms").get_to(metrics.session_duration_ms);
  j.at("long_pause_count").get_to(metrics.long_pause_count);
  j.at("config_used").get_to(metrics.config_used);
}

void to_json(Json& j, const ParseIssue& issue) {
  j = Json{{"line_number", issue.line_number},
           {"severity", to_string(issue.severity)},
           {"message", issue.message}};
}

void to_json(Json& j, const RawCue& cue) {
  j = Json{{"index", cue.index ? Json(*cue.index) : Json(nullptr)},
           {"start_ms", cue.start_ms},
           {"end_ms", cue.end_ms},
           {"speaker", cue.speaker},
           {"text", cue.text}};
}

void to_json(Json& j, const Transcript& transcript) {
  j = Json{{"source_name", transcript.source_name},
           {"cues", transcript.cues},
           {"speakers", transcript.speakers},
           {"duration_ms", transcript.duration_ms}};
}

void to_json(Json& j, const TimelineTrack& track) {
  Json segments = Json::array();
  for (const auto& s : track.segments) {
    segments.push_back(
        Json{{"start_ms", s.start_ms}, {"end_ms", s.end_ms}, {"kind", to_string(s.kind)}});
  }
  j = Json{{"speaker", track.speaker},
           {"speaker_index", track.speaker_index},
           {"segments", std::move(segments)}};
}

void to_json(Json& j, const SeekResult& seek) {
  j = Json{{"offset_ms", seek.offset_ms},
           {"active_cue", seek.active_cue ? Json(*seek.active_cue) : Json(nullptr)},
           {"next_cue", seek.next_cue ? Json(*seek.next_cue) : Json(nullptr)}};
}

Json timeline_document(const std::vector<TimelineTrack>& tracks, Millis duration_ms) {
  return Json{{"duration_ms", duration_ms}, {"tracks", tracks}};
}

std::string dump_canonical(const Json& j) {
  return j.dump(2, ' ', false, Json::error_handler_t::replace) + "\n";
}

}  // namespace tandem
