#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "tandem/json_io.hpp"
#include "tandem/metrics.hpp"

namespace tandem {

struct Participant {
  std::string participant_id;
  std::string display_name;
  std::string institution;
  std::string target_language;  // "fr" or "en"

  bool operator==(const Participant&) const = default;
};

struct Group {
  std::string group_id;
  std::vector<std::string> participant_ids;

  bool operator==(const Group&) const = default;
};

struct Cohort {
  std::string cohort_id;
  std::string name;
  std::vector<Participant> participants;
  std::vector<Group> groups;

  const Group* find_group(std::string_view group_id) const;
  const Participant* find_participant(std::string_view participant_id) const;
  bool operator==(const Cohort&) const = default;
};

struct SessionRecord {
  std::string session_id;
  std::string cohort_id;
  std::string group_id;
  int week_number = 0;
  std::string recorded_at;  // YYYY-MM-DD
  // Both relative to the data directory.
  std::string transcript_path;
  std::optional<std::string> media_path;
  std::map<std::string, std::string> speaker_map;  // transcript label -> participant_id
  SessionMetrics metrics;
  std::string created_at;  // UTC, YYYY-MM-DDTHH:MM:SSZ

  bool operator==(const SessionRecord&) const = default;
};

struct ProgressionPoint {
  int week_number = 0;
  std::string session_id;
  double share = 0.0;
  std::int64_t floor_turn_count = 0;
  Millis speaking_ms = 0;
  std::int64_t filled_pause_count = 0;

  bool operator==(const ProgressionPoint&) const = default;
};

// Difference between two consecutive points (later minus earlier).
struct ProgressionDelta {
  int from_week = 0;
  int to_week = 0;
  double share = 0.0;
  std::int64_t floor_turn_count = 0;
  Millis speaking_ms = 0;
  std::int64_t filled_pause_count = 0;

  bool operator==(const ProgressionDelta&) const = default;
};

struct ProgressionReport {
  std::string cohort_id;
  std::string participant_id;
  std::vector<ProgressionPoint> points;
  std::vector<ProgressionDelta> deltas;

  bool operator==(const ProgressionReport&) const = default;
};

class StoreError : public std::runtime_error {
 public:
  enum class Kind { kNotFound, kConflict, kValidation };
  StoreError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Throws StoreError(kValidation) naming the first violated invariant.
void check_cohort(const Cohort& cohort);

// Everything needed to persist one session. The store assigns the file
// paths and created_at; session_id is generated when empty.
struct NewSession {
  std::string session_id;
  std::string cohort_id;
  std::string group_id;
  int week_number = 0;
  std::string recorded_at;
  std::map<std::string, std::string> speaker_map;
  SessionMetrics metrics;
  std::string transcript_text;
  std::optional<std::string> media_bytes;
  std::string media_extension;  // without the dot; sanitized by the store
};

struct SessionFilter {
  std::optional<std::string> group_id;
  std::optional<int> week_number;
};

// Cohorts, sessions and their files under one data directory:
//
//   <data_dir>/cohorts/<cohort_id>/cohort.json
//   <data_dir>/cohorts/<cohort_id>/index.json        session ids, in save order
//   <data_dir>/cohorts/<cohort_id>/sessions/<session_id>/session.json
//                                                   /transcript.vtt
//                                                   /media.<ext>
//
// Every document is written to a temporary name and renamed into place. A
// session directory is assembled under a temporary name, renamed, and only
// then added to the index, so the index never names a partial session.
// Reads share a lock; writes to one cohort are serialized by that cohort's
// mutex and writes to different cohorts proceed in parallel.
class SessionStore {
 public:
  // Creates the directory if needed and loads every cohort. Leftover
  // temporary files and session directories missing from an index are
  // removed.
  explicit SessionStore(std::filesystem::path data_dir);

  const std::filesystem::path& data_dir() const { return data_dir_; }

  void create_cohort(const Cohort& cohort);
  Cohort load_cohort(const std::string& cohort_id) const;
  std::vector<Cohort> list_cohorts() const;  // by cohort_id

  SessionRecord save_session(const NewSession& session);
  SessionRecord load_session(const std::string& session_id) const;
  // Ordered by (week_number, recorded_at, session_id).
  std::vector<SessionRecord> list_sessions(const std::string& cohort_id,
                                           const SessionFilter& filter = {}) const;
  void delete_session(const std::string& session_id);

  ProgressionReport progression_report(const std::string& cohort_id,
                                       const std::string& participant_id) const;

  std::filesystem::path absolute(const std::string& relative) const { return data_dir_ / relative; }

 private:
  struct CohortState {
    Cohort cohort;
    std::vector<std::string> session_ids;
  };

  std::filesystem::path cohort_dir(const std::string& cohort_id) const;
  std::mutex& write_mutex(const std::string& cohort_id);
  void load_all();
  void write_index(const std::string& cohort_id, const std::vector<std::string>& ids) const;
  SessionRecord validate_new(const NewSession& session, const CohortState& state) const;

  std::filesystem::path data_dir_;
  mutable std::shared_mutex cache_mutex_;
  std::map<std::string, CohortState> cohorts_;
  std::map<std::string, SessionRecord> sessions_;
  std::mutex registry_mutex_;
  std::map<std::string, std::unique_ptr<std::mutex>> write_mutexes_;
  // Session ids claimed by in-flight saves.
  std::map<std::string, std::string> reserved_ids_;
};

// Cohort ids and session ids double as directory names.
bool is_safe_id(std::string_view id);
bool is_calendar_date(std::string_view text);

void to_json(Json& j, const Participant& p);
void from_json(const Json& j, Participant& p);
void to_json(Json& j, const Group& g);
void from_json(const Json& j, Group& g);
void to_json(Json& j, const Cohort& c);
void from_json(const Json& j, Cohort& c);
void to_json(Json& j, const SessionRecord& r);
void from_json(const Json& j, SessionRecord& r);
void to_json(Json& j, const ProgressionPoint& p);
void to_json(Json& j, const ProgressionDelta& d);
void to_json(Json& j, const ProgressionReport& r);

// Builds the report from records alone; the store and the report command
// share it.
ProgressionReport build_progression(const std::string& cohort_id,
                                    const std::string& participant_id,
                                    const std::vector<SessionRecord>& sessions);

}  // namespace tandem
