#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "tandem/analysis_config.hpp"
#include "tandem/metrics.hpp"
#include "tandem/timeline.hpp"
#include "tandem/transcript.hpp"
#include "tandem/turns.hpp"

// JSON mapping for the analysis types. Field names match the struct fields;
// nlohmann objects keep keys sorted, which makes every document canonical.
namespace tandem {

using Json = nlohmann::json;

std::string_view to_string(TurnKind kind);
std::string_view to_string(Severity severity);

void to_json(Json& j, const AnalysisConfig& config);
void from_json(const Json& j, AnalysisConfig& config);

void to_json(Json& j, const LanguageBreakdown& lang);
void from_json(const Json& j, LanguageBreakdown& lang);
void to_json(Json& j, const SpeakerMetrics& m);
void from_json(const Json& j, SpeakerMetrics& m);
void to_json(Json& j, const FlowMatrix& flow);
void from_json(const Json& j, FlowMatrix& flow);
void to_json(Json& j, const SessionMetrics& metrics);
void from_json(const Json& j, SessionMetrics& metrics);

void to_json(Json& j, const ParseIssue& issue);
void to_json(Json& j, const RawCue& cue);
void to_json(Json& j, const Transcript& transcript);

void to_json(Json& j, const TimelineTrack& track);
void to_json(Json& j, const SeekResult& seek);

Json timeline_document(const std::vector<TimelineTrack>& tracks, Millis duration_ms);

// Two-space indented text with a trailing newline. Every HTTP body and CLI
// JSON output goes through this so equal documents are byte-identical.
std::string dump_canonical(const Json& j);

}  // namespace tandem
