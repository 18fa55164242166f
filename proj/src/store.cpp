#include "tandem/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace tandem {
namespace fs = std::filesystem;

namespace {

constexpr std::string_view kTempPrefix = ".tmp-";

[[noreturn]] void invalid(const std::string& message) {
  throw StoreError(StoreError::Kind::kValidation, message);
}

[[noreturn]] void not_found(const std::string& message) {
  throw StoreError(StoreError::Kind::kNotFound, message);
}

[[noreturn]] void conflict(const std::string& message) {
  throw StoreError(StoreError::Kind::kConflict, message);
}

std::string random_hex(std::size_t digits) {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (std::size_t i = 0; i < digits; ++i) out.push_back(kHex[rng() % 16]);
  return out;
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_bytes(const fs::path& path, std::string_view bytes) {
  int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw std::runtime_error("cannot create " + path.string() + ": " + std::strerror(errno));
  const char* p = bytes.data();
  std::size_t left = bytes.size();
  while (left > 0) {
    auto n = ::write(fd, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      int err = errno;
      ::close(fd);
      throw std::runtime_error("cannot write " + path.string() + ": " + std::strerror(err));
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0 || ::close(fd) != 0) {
    throw std::runtime_error("cannot flush " + path.string());
  }
}

void write_atomic(const fs::path& path, std::string_view bytes) {
  auto tmp = path.parent_path() / (std::string(kTempPrefix) + path.filename().string() + "-" +
                                   random_hex(8));
  try {
    write_bytes(tmp, bytes);
    fs::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
}

std::string utc_now() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string sanitize_extension(std::string_view ext) {
  std::string out;
  for (char c : ext) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (out.empty() || out.size() > 8) return "bin";
  return out;
}

void reject_unknown_keys(const Json& j, std::initializer_list<std::string_view> allowed,
                         std::string_view what) {
  if (!j.is_object()) invalid(std::string(what) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      invalid(std::string(what) + " has unknown field '" + key + "'");
    }
  }
}

bool session_order(const SessionRecord& a, const SessionRecord& b) {
  return std::tie(a.week_number, a.recorded_at, a.session_id) <
         std::tie(b.week_number, b.recorded_at, b.session_id);
}

}  // namespace

bool is_safe_id(std::string_view id) {
  if (id.empty() || id.size() > 64) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
  });
}

bool is_calendar_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return false;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9}) {
    if (!std::isdigit(static_cast<unsigned char>(text[i]))) return false;
  }
  int y = std::stoi(std::string(text.substr(0, 4)));
  int m = std::stoi(std::string(text.substr(5, 2)));
  int d = std::stoi(std::string(text.substr(8, 2)));
  if (m < 1 || m > 12 || d < 1) return false;
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
  return d <= kDays[m - 1] + (m == 2 && leap ? 1 : 0);
}

const Group* Cohort::find_group(std::string_view group_id) const {
  for (const auto& g : groups) {
    if (g.group_id == group_id) return &g;
  }
  return nullptr;
}

const Participant* Cohort::find_participant(std::string_view participant_id) const {
  for (const auto& p : participants) {
    if (p.participant_id == participant_id) return &p;
  }
  return nullptr;
}

void check_cohort(const Cohort& cohort) {
  if (!is_safe_id(cohort.cohort_id)) {
    invalid("cohort_id must be 1-64 characters of [A-Za-z0-9_-]");
  }
  std::set<std::string> ids;
  for (const auto& p : cohort.participants) {
    if (p.participant_id.empty()) invalid("participant_id must be non-empty");
    if (!ids.insert(p.participant_id).second) {
      invalid("duplicate participant_id '" + p.participant_id + "'");
    }
    if (p.target_language != "fr" && p.target_language != "en") {
      invalid("participant '" + p.participant_id + "' target_language must be fr or en");
    }
  }
  std::set<std::string> group_ids;
  std::map<std::string, std::string> member_of;
  for (const auto& g : cohort.groups) {
    if (g.group_id.empty()) invalid("group_id must be non-empty");
    if (!group_ids.insert(g.group_id).second) invalid("duplicate group_id '" + g.group_id + "'");
    std::set<std::string> members(g.participant_ids.begin(), g.participant_ids.end());
    if (members.size() != g.participant_ids.size()) {
      invalid("group '" + g.group_id + "' lists a participant twice");
    }
    if (members.size() < 2) invalid("group '" + g.group_id + "' has fewer than 2 members");
    for (const auto& pid : members) {
      if (!ids.contains(pid)) {
        invalid("group '" + g.group_id + "' references unknown participant '" + pid + "'");
      }
      auto [it, fresh] = member_of.emplace(pid, g.group_id);
      if (!fresh) {
        invalid("participant '" + pid + "' belongs to groups '" + it->second + "' and '" +
                g.group_id + "'");
      }
    }
  }
}

// --- JSON ---------------------------------------------------------------------------

void to_json(Json& j, const Participant& p) {
  j = Json{{"participant_id", p.participant_id},
           {"display_name", p.display_name},
           {"institution", p.institution},
           {"target_language", p.target_language}};
}

void from_json(const Json& j, Participant& p) {
  reject_unknown_keys(j, {"participant_id", "display_name", "institution", "target_language"},
                      "participant");
  j.at("participant_id").get_to(p.participant_id);
  j.at("display_name").get_to(p.display_name);
  j.at("institution").get_to(p.institution);
  j.at("target_language").get_to(p.target_language);
}

void to_json(Json& j, const Group& g) {
  j = Json{{"group_id", g.group_id}, {"participant_ids", g.participant_ids}};
}

void from_json(const Json& j, Group& g) {
  reject_unknown_keys(j, {"group_id", "participant_ids"}, "group");
  j.at("group_id").get_to(g.group_id);
  j.at("participant_ids").get_to(g.participant_ids);
}

void to_json(Json& j, const Cohort& c) {
  j = Json{{"cohort_id", c.cohort_id},
           {"name", c.name},
           {"participants", c.participants},
           {"groups", c.groups}};
}

void from_json(const Json& j, Cohort& c) {
  reject_unknown_keys(j, {"cohort_id", "name", "participants", "groups"}, "cohort");
  j.at("cohort_id").get_to(c.cohort_id);
  j.at("name").get_to(c.name);
  j.at("participants").get_to(c.participants);
  j.at("groups").get_to(c.groups);
}

void to_json(Json& j, const SessionRecord& r) {
  j = Json{{"session_id", r.session_id},
           {"cohort_id", r.cohort_id},
           {"group_id", r.group_id},
           {"week_number", r.week_number},
           {"recorded_at", r.recorded_at},
           {"transcript_path", r.transcript_path},
           {"media_path", r.media_path ? Json(*r.media_path) : Json(nullptr)},
           {"speaker_map", r.speaker_map},
           {"metrics", r.metrics},
           {"created_at", r.created_at}};
}

void from_json(const Json& j, SessionRecord& r) {
  j.at("session_id").get_to(r.session_id);
  j.at("cohort_id").get_to(r.cohort_id);
  j.at("group_id").get_to(r.group_id);
  j.at("week_number").get_to(r.week_number);
  j.at("recorded_at").get_to(r.recorded_at);
  j.at("transcript_path").get_to(r.transcript_path);
  const auto& media = j.at("media_path");
  r.media_path = media.is_null() ? std::nullopt : std::optional(media.get<std::string>());
  j.at("speaker_map").get_to(r.speaker_map);
  j.at("metrics").get_to(r.metrics);
  j.at("created_at").get_to(r.created_at);
}

void to_json(Json& j, const ProgressionPoint& p) {
  j = Json{{"week_number", p.week_number},
           {"session_id", p.session_id},
           {"share", p.share},
           {"floor_turn_count", p.floor_turn_count},
           {"speaking_ms", p.speaking_ms},
           {"filled_pause_count", p.filled_pause_count}};
}

void to_json(Json& j, const ProgressionDelta& d) {
  j = Json{{"from_week", d.from_week},
           {"to_week", d.to_week},
           {"share", d.share},
           {"floor_turn_count", d.floor_turn_count},
           {"speaking_ms", d.speaking_ms},
           {"filled_pause_count", d.filled_pause_count}};
}

void to_json(Json& j, const ProgressionReport& r) {
  j = Json{{"cohort_id", r.cohort_id},
           {"participant_id", r.participant_id},
           {"points", r.points},
           {"deltas", r.deltas}};
}

// --- progression --------------------------------------------------------------------------

ProgressionReport build_progression(const std::string& cohort_id,
                                    const std::string& participant_id,
                                    const std::vector<SessionRecord>& sessions) {
  ProgressionReport report;
  report.cohort_id = cohort_id;
  report.participant_id = participant_id;

  std::vector<const SessionRecord*> ordered;
  for (const auto& s : sessions) ordered.push_back(&s);
  std::sort(ordered.begin(), ordered.end(),
            [](const SessionRecord* a, const SessionRecord* b) { return session_order(*a, *b); });

  for (const auto* s : ordered) {
    ProgressionPoint point;
    point.week_number = s->week_number;
    point.session_id = s->session_id;
    bool present = false;
    // Several transcript labels may name the same person in one session.
    for (const auto& [label, pid] : s->speaker_map) {
      if (pid != participant_id) continue;
      auto it = s->metrics.per_speaker.find(label);
      if (it == s->metrics.per_speaker.end()) continue;
      present = true;
      point.speaking_ms += it->second.speaking_ms;
      point.floor_turn_count += it->second.floor_turn_count;
      point.filled_pause_count += it->second.filled_pause_count;
    }
    if (!present) continue;
    const auto total = s->metrics.total_speaking_ms;
    point.share = total > 0 ? static_cast<double>(point.speaking_ms) / static_cast<double>(total)
                            : 0.0;
    report.points.push_back(std::move(point));
  }

  for (std::size_t k = 1; k < report.points.size(); ++k) {
    const auto& a = report.points[k - 1];
    const auto& b = report.points[k];
    report.deltas.push_back({a.week_number, b.week_number, b.share - a.share,
                             b.floor_turn_count - a.floor_turn_count,
                             b.speaking_ms - a.speaking_ms,
                             b.filled_pause_count - a.filled_pause_count});
  }
  return report;
}

// --- SessionStore ------------------------------------------------------------------------

SessionStore::SessionStore(fs::path data_dir) : data_dir_(std::move(data_dir)) {
  fs::create_directories(data_dir_ / "cohorts");
  load_all();
}

fs::path SessionStore::cohort_dir(const std::string& cohort_id) const {
  return data_dir_ / "cohorts" / cohort_id;
}

std::mutex& SessionStore::write_mutex(const std::string& cohort_id) {
  std::lock_guard lock(registry_mutex_);
  auto& slot = write_mutexes_[cohort_id];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

void SessionStore::load_all() {
  for (const auto& entry : fs::directory_iterator(data_dir_ / "cohorts")) {
    const auto name = entry.path().filename().string();
    if (name.starts_with(kTempPrefix)) {
      fs::remove_all(entry.path());
      continue;
    }
    if (!entry.is_directory() || !fs::exists(entry.path() / "cohort.json")) continue;

    CohortState state;
    state.cohort = Json::parse(read_bytes(entry.path() / "cohort.json")).get<Cohort>();
    auto index_path = entry.path() / "index.json";
    if (fs::exists(index_path)) {
      Json::parse(read_bytes(index_path)).at("session_ids").get_to(state.session_ids);
    }

    auto sessions_dir = entry.path() / "sessions";
    std::set<std::string> listed(state.session_ids.begin(), state.session_ids.end());
    for (const auto& id : state.session_ids) {
      auto record =
          Json::parse(read_bytes(sessions_dir / id / "session.json")).get<SessionRecord>();
      sessions_.emplace(id, std::move(record));
    }
    // Anything else under sessions/ is debris from an interrupted write.
    if (fs::exists(sessions_dir)) {
      for (const auto& s : fs::directory_iterator(sessions_dir)) {
        if (!listed.contains(s.path().filename().string())) fs::remove_all(s.path());
      }
    }
    for (const auto& f : fs::directory_iterator(entry.path())) {
      if (f.path().filename().string().starts_with(kTempPrefix)) fs::remove_all(f.path());
    }
    cohorts_.emplace(state.cohort.cohort_id, std::move(state));
  }
}

void SessionStore::write_index(const std::string& cohort_id,
                               const std::vector<std::string>& ids) const {
  write_atomic(cohort_dir(cohort_id) / "index.json",
               dump_canonical(Json{{"cohort_id", cohort_id}, {"session_ids", ids}}));
}

void SessionStore::create_cohort(const Cohort& cohort) {
  check_cohort(cohort);
  std::lock_guard write(write_mutex(cohort.cohort_id));
  {
    std::shared_lock read(cache_mutex_);
    if (cohorts_.contains(cohort.cohort_id)) {
      conflict("cohort '" + cohort.cohort_id + "' already exists");
    }
  }

  auto final_dir = cohort_dir(cohort.cohort_id);
  auto tmp = data_dir_ / "cohorts" / (std::string(kTempPrefix) + cohort.cohort_id + "-" + random_hex(8));
  try {
    fs::create_directories(tmp / "sessions");
    write_bytes(tmp / "cohort.json", dump_canonical(cohort));
    write_bytes(tmp / "index.json",
                dump_canonical(Json{{"cohort_id", cohort.cohort_id},
                                    {"session_ids", Json::array()}}));
    fs::rename(tmp, final_dir);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(tmp, ec);
    throw;
  }

  std::unique_lock lock(cache_mutex_);
  cohorts_.emplace(cohort.cohort_id, CohortState{cohort, {}});
}

Cohort SessionStore::load_cohort(const std::string& cohort_id) const {
  std::shared_lock lock(cache_mutex_);
  auto it = cohorts_.find(cohort_id);
  if (it == cohorts_.end()) not_found("cohort '" + cohort_id + "' not found");
  return it->second.cohort;
}

std::vector<Cohort> SessionStore::list_cohorts() const {
  std::shared_lock lock(cache_mutex_);
  std::vector<Cohort> out;
  for (const auto& [id, state] : cohorts_) out.push_back(state.cohort);
  return out;
}

SessionRecord SessionStore::validate_new(const NewSession& s, const CohortState& state) const {
  const auto& cohort = state.cohort;
  const Group* group = cohort.find_group(s.group_id);
  if (!group) invalid("group '" + s.group_id + "' is not part of cohort '" + cohort.cohort_id + "'");
  if (s.week_number < 1) invalid("week_number must be >= 1");
  if (!s.session_id.empty() && !is_safe_id(s.session_id)) {
    invalid("session_id must be 1-64 characters of [A-Za-z0-9_-]");
  }
  if (!s.recorded_at.empty() && !is_calendar_date(s.recorded_at)) {
    invalid("recorded_at must be a YYYY-MM-DD date");
  }
  for (const auto& [label, pid] : s.speaker_map) {
    if (std::find(group->participant_ids.begin(), group->participant_ids.end(), pid) ==
        group->participant_ids.end()) {
      invalid("speaker_map maps '" + label + "' to '" + pid + "', who is not in group '" +
              s.group_id + "'");
    }
  }
  std::vector<std::string> unmapped;
  for (const auto& [label, m] : s.metrics.per_speaker) {
    if (!s.speaker_map.contains(label)) unmapped.push_back(label);
  }
  if (!unmapped.empty()) {
    std::string list;
    for (const auto& u : unmapped) list += (list.empty() ? "'" : ", '") + u + "'";
    invalid("speaker_map does not map transcript speaker(s) " + list);
  }
  for (const auto& id : state.session_ids) {
    const auto& other = sessions_.at(id);
    if (other.group_id == s.group_id && other.week_number == s.week_number) {
      conflict("group '" + s.group_id + "' already has a session for week " +
               std::to_string(s.week_number));
    }
  }

  SessionRecord record;
  record.cohort_id = cohort.cohort_id;
  record.group_id = s.group_id;
  record.week_number = s.week_number;
  record.speaker_map = s.speaker_map;
  record.metrics = s.metrics;
  return record;
}

SessionRecord SessionStore::save_session(const NewSession& s) {
  std::unique_lock write(write_mutex(s.cohort_id));
  SessionRecord record;
  {
    std::unique_lock lock(cache_mutex_);
    auto it = cohorts_.find(s.cohort_id);
    if (it == cohorts_.end()) not_found("cohort '" + s.cohort_id + "' not found");
    record = validate_new(s, it->second);
    record.session_id = s.session_id;
    if (record.session_id.empty()) {
      do {
        record.session_id = random_hex(16);
      } while (sessions_.contains(record.session_id) ||
               reserved_ids_.contains(record.session_id));
    } else if (sessions_.contains(record.session_id) ||
               reserved_ids_.contains(record.session_id)) {
      conflict("session '" + record.session_id + "' already exists");
    }
    reserved_ids_.emplace(record.session_id, s.cohort_id);
  }
  auto release = [&] {
    std::unique_lock lock(cache_mutex_);
    reserved_ids_.erase(record.session_id);
  };

  record.created_at = utc_now();
  record.recorded_at = s.recorded_at.empty() ? record.created_at.substr(0, 10) : s.recorded_at;
  const auto rel_dir = fs::path("cohorts") / s.cohort_id / "sessions" / record.session_id;
  record.transcript_path = (rel_dir / "transcript.vtt").generic_string();
  if (s.media_bytes) {
    record.media_path = (rel_dir / ("media." + sanitize_extension(s.media_extension))).generic_string();
  }

  const auto sessions_dir = cohort_dir(s.cohort_id) / "sessions";
  const auto final_dir = data_dir_ / rel_dir;
  const auto tmp = sessions_dir / (std::string(kTempPrefix) + record.session_id);
  std::vector<std::string> ids;
  {
    std::shared_lock lock(cache_mutex_);
    ids = cohorts_.at(s.cohort_id).session_ids;
  }
  ids.push_back(record.session_id);
  bool renamed = false;
  try {
    fs::create_directories(tmp);
    write_bytes(tmp / "transcript.vtt", s.transcript_text);
    if (s.media_bytes) {
      write_bytes(tmp / fs::path(*record.media_path).filename(), *s.media_bytes);
    }
    write_bytes(tmp / "session.json", dump_canonical(record));
    fs::rename(tmp, final_dir);
    renamed = true;
    write_index(s.cohort_id, ids);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(renamed ? final_dir : tmp, ec);
    release();
    throw;
  }

  std::unique_lock lock(cache_mutex_);
  reserved_ids_.erase(record.session_id);
  cohorts_.at(s.cohort_id).session_ids = std::move(ids);
  sessions_.emplace(record.session_id, record);
  return record;
}

SessionRecord SessionStore::load_session(const std::string& session_id) const {
  std::shared_lock lock(cache_mutex_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) not_found("session '" + session_id + "' not found");
  return it->second;
}

std::vector<SessionRecord> SessionStore::list_sessions(const std::string& cohort_id,
                                                       const SessionFilter& filter) const {
  std::shared_lock lock(cache_mutex_);
  auto it = cohorts_.find(cohort_id);
  if (it == cohorts_.end()) not_found("cohort '" + cohort_id + "' not found");
  std::vector<SessionRecord> out;
  for (const auto& id : it->second.session_ids) {
    const auto& r = sessions_.at(id);
    if (filter.group_id && r.group_id != *filter.group_id) continue;
    if (filter.week_number && r.week_number != *filter.week_number) continue;
    out.push_back(r);
  }
  std::sort(out.begin(), out.end(), session_order);
  return out;
}

void SessionStore::delete_session(const std::string& session_id) {
  std::string cohort_id;
  {
    std::shared_lock lock(cache_mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) not_found("session '" + session_id + "' not found");
    cohort_id = it->second.cohort_id;
  }
  std::lock_guard write(write_mutex(cohort_id));
  std::vector<std::string> ids;
  {
    std::shared_lock lock(cache_mutex_);
    // A concurrent delete may have won the race.
    if (!sessions_.contains(session_id)) not_found("session '" + session_id + "' not found");
    ids = cohorts_.at(cohort_id).session_ids;
  }
  ids.erase(std::remove(ids.begin(), ids.end(), session_id), ids.end());
  // Drop it from the index first; a crash after this leaves only debris
  // that the next load sweeps away.
  write_index(cohort_id, ids);
  {
    std::unique_lock lock(cache_mutex_);
    cohorts_.at(cohort_id).session_ids = ids;
    sessions_.erase(session_id);
  }
  std::error_code ec;
  fs::remove_all(cohort_dir(cohort_id) / "sessions" / session_id, ec);
}

ProgressionReport SessionStore::progression_report(const std::string& cohort_id,
                                                   const std::string& participant_id) const {
  auto cohort = load_cohort(cohort_id);
  if (!cohort.find_participant(participant_id)) {
    not_found("participant '" + participant_id + "' not found in cohort '" + cohort_id + "'");
  }
  return build_progression(cohort_id, participant_id, list_sessions(cohort_id));
}

}  // namespace tandem
