#include "tandem/api.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <fstream>
#include <mutex>
#include <thread>

#include "httplib.h"
#include "tandem/json_io.hpp"
#include "tandem/timeline.hpp"

namespace tandem {
namespace {

using httplib::Request;
using httplib::Response;

constexpr const char* kJson = "application/json";

void send_json(Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(dump_canonical(body), kJson);
}

void send_error(Response& res, int status, std::string_view code, const std::string& message,
                Json detail = nullptr) {
  send_json(res, status,
            Json{{"status", status}, {"code", code}, {"message", message}, {"detail", detail}});
}

struct BadRequest {
  std::string message;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::optional<std::int64_t> parse_nonnegative(const std::string& text) {
  std::int64_t value = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size() || value < 0) return std::nullopt;
  return value;
}

std::string media_type(const std::filesystem::path& path) {
  static const std::map<std::string, std::string> kTypes = {
      {".mp4", "video/mp4"},   {".m4v", "video/mp4"},   {".webm", "video/webm"},
      {".mov", "video/quicktime"}, {".m4a", "audio/mp4"}, {".mp3", "audio/mpeg"},
      {".wav", "audio/wav"},   {".ogg", "audio/ogg"},   {".oga", "audio/ogg"},
      {".ogv", "video/ogg"}};
  auto it = kTypes.find(path.extension().string());
  return it == kTypes.end() ? "application/octet-stream" : it->second;
}

// Upload metadata: {"group_id", "week_number", "speaker_map", optional
// "recorded_at", optional "session_id"}.
NewSession parse_metadata(const std::string& text, const std::string& cohort_id) {
  Json meta;
  try {
    meta = Json::parse(text);
  } catch (const Json::exception& e) {
    throw BadRequest{std::string("metadata is not valid JSON: ") + e.what()};
  }
  if (!meta.is_object()) throw BadRequest{"metadata must be a JSON object"};
  static const std::set<std::string> kAllowed = {"group_id", "week_number", "speaker_map",
                                                 "recorded_at", "session_id"};
  for (const auto& [key, value] : meta.items()) {
    if (!kAllowed.contains(key)) throw BadRequest{"metadata has unknown field '" + key + "'"};
  }
  NewSession s;
  s.cohort_id = cohort_id;
  if (!meta.contains("group_id") || !meta["group_id"].is_string()) {
    throw BadRequest{"metadata.group_id must be a string"};
  }
  s.group_id = meta["group_id"].get<std::string>();
  if (!meta.contains("week_number") || !meta["week_number"].is_number_integer()) {
    throw BadRequest{"metadata.week_number must be an integer"};
  }
  auto week = meta["week_number"].get<std::int64_t>();
  if (week < 1 || week > 1000) throw BadRequest{"metadata.week_number must be in 1..1000"};
  s.week_number = static_cast<int>(week);
  if (!meta.contains("speaker_map") || !meta["speaker_map"].is_object()) {
    throw BadRequest{"metadata.speaker_map must be an object"};
  }
  for (const auto& [label, pid] : meta["speaker_map"].items()) {
    if (!pid.is_string()) throw BadRequest{"metadata.speaker_map values must be strings"};
    s.speaker_map[label] = pid.get<std::string>();
  }
  for (const char* key : {"recorded_at", "session_id"}) {
    if (!meta.contains(key)) continue;
    if (!meta[key].is_string()) throw BadRequest{std::string("metadata.") + key + " must be a string"};
  }
  if (meta.contains("recorded_at")) s.recorded_at = meta["recorded_at"].get<std::string>();
  if (meta.contains("session_id")) s.session_id = meta["session_id"].get<std::string>();
  return s;
}

}  // namespace

struct ApiServer::Impl {
  SessionStore& store;
  ApiOptions options;
  httplib::Server server;
  int port = -1;

  // httplib ignores stop() until its accept loop is running, so a stop that
  // races ahead of run() is remembered here.
  std::mutex run_mu;
  bool started = false;
  bool stop_requested = false;
  std::atomic<bool> finished{false};

  Impl(SessionStore& s, ApiOptions o) : store(s), options(std::move(o)) { routes(); }

  using Handler = std::function<void(const Request&, Response&)>;

  Handler guarded(Handler h) {
    return [h = std::move(h)](const Request& req, Response& res) {
      try {
        h(req, res);
      } catch (const BadRequest& e) {
        send_error(res, 400, "validation_failed", e.message);
      } catch (const StoreError& e) {
        switch (e.kind()) {
          case StoreError::Kind::kNotFound: send_error(res, 404, "not_found", e.what()); break;
          case StoreError::Kind::kConflict: send_error(res, 409, "conflict", e.what()); break;
          case StoreError::Kind::kValidation:
            send_error(res, 400, "validation_failed", e.what());
            break;
        }
      } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
      }
    };
  }

  Transcript stored_transcript(const SessionRecord& r) const {
    return parse_vtt(read_file(store.absolute(r.transcript_path)), "transcript.vtt").transcript;
  }

  Json timeline(const SessionRecord& r) const {
    auto transcript = stored_transcript(r);
    const auto& config = r.metrics.config_used;
    auto seq = classify_backchannels(segment_turns(transcript, config), config);
    auto cohort = store.load_cohort(r.cohort_id);

    // Colour keys follow the participant's position in the cohort so they
    // stay put from one week to the next.
    std::map<std::string, int> keys;
    for (const auto& label : transcript.speakers) {
      auto mapped = r.speaker_map.find(label);
      int key = static_cast<int>(cohort.participants.size());
      if (mapped != r.speaker_map.end()) {
        for (std::size_t i = 0; i < cohort.participants.size(); ++i) {
          if (cohort.participants[i].participant_id == mapped->second) key = static_cast<int>(i);
        }
      }
      keys[label] = key;
    }
    auto order = transcript.speakers;
    std::stable_sort(order.begin(), order.end(), [&](const std::string& a, const std::string& b) {
      return keys.at(a) < keys.at(b);
    });
    return timeline_document(build_timeline(seq, order, keys), transcript.duration_ms);
  }

  void upload(const Request& req, Response& res) {
    const auto cohort_id = req.path_params.at("id");
    store.load_cohort(cohort_id);
    if (!req.is_multipart_form_data()) {
      throw BadRequest{"expected multipart/form-data with transcript and metadata parts"};
    }
    if (!req.has_file("transcript")) throw BadRequest{"missing 'transcript' part"};
    if (!req.has_file("metadata")) throw BadRequest{"missing 'metadata' part"};

    auto session = parse_metadata(req.get_file_value("metadata").content, cohort_id);
    const auto transcript_part = req.get_file_value("transcript");
    auto parsed = parse_vtt(transcript_part.content, transcript_part.filename);
    if (parsed.has_errors()) {
      send_error(res, 400, "bad_transcript", "transcript could not be parsed",
                 Json{{"issues", parsed.issues}});
      return;
    }
    session.transcript_text = transcript_part.content;
    session.metrics = compute_session_metrics(parsed.transcript, options.config);
    if (req.has_file("media")) {
      auto media = req.get_file_value("media");
      session.media_extension = std::filesystem::path(media.filename).extension().string();
      session.media_bytes = std::move(media.content);
    }

    auto record = store.save_session(session);
    auto warnings = parsed.issues;
    for (auto& issue : validate(parsed.transcript)) warnings.push_back(std::move(issue));
    res.set_header("Location", "/sessions/" + record.session_id);
    send_json(res, 201, Json{{"session", record}, {"warnings", warnings}});
  }

  void media(const Request& req, Response& res) {
    auto record = store.load_session(req.path_params.at("id"));
    if (!record.media_path) {
      send_error(res, 404, "not_found", "session has no media attached");
      return;
    }
    const auto path = store.absolute(*record.media_path);
    const auto size = static_cast<std::int64_t>(std::filesystem::file_size(path));
    // Ranges reaching past the end are clamped rather than refused. The
    // request object belongs to the server loop, so adjusting it here only
    // changes how the library slices this response.
    for (auto& [first, last] : const_cast<Request&>(req).ranges) {
      if (first >= 0 && last >= size) last = size - 1;
      if (first < 0 && last > size) last = size;
    }
    res.set_header("Accept-Ranges", "bytes");
    if (size == 0) {
      res.set_content("", media_type(path));
      return;
    }
    res.set_content_provider(
        static_cast<std::size_t>(size), media_type(path),
        [path](std::size_t offset, std::size_t length, httplib::DataSink& sink) {
          std::ifstream in(path, std::ios::binary);
          in.seekg(static_cast<std::streamoff>(offset));
          std::vector<char> buf(std::min<std::size_t>(length, 1 << 16));
          while (length > 0 && in) {
            auto n = std::min(length, buf.size());
            in.read(buf.data(), static_cast<std::streamsize>(n));
            auto got = static_cast<std::size_t>(in.gcount());
            if (got == 0 || !sink.write(buf.data(), got)) return false;
            length -= got;
          }
          return length == 0;
        });
  }

  void routes() {
    auto& s = server;
    s.set_payload_max_length(std::size_t{2} << 30);

    s.Get("/cohorts", guarded([this](const Request&, Response& res) {
            send_json(res, 200, store.list_cohorts());
          }));

    s.Post("/cohorts", guarded([this](const Request& req, Response& res) {
             Cohort cohort;
             try {
               cohort = Json::parse(req.body).get<Cohort>();
             } catch (const Json::exception& e) {
               throw BadRequest{std::string("invalid cohort document: ") + e.what()};
             }
             store.create_cohort(cohort);
             res.set_header("Location", "/cohorts/" + cohort.cohort_id);
             send_json(res, 201, cohort);
           }));

    s.Get("/cohorts/:id", guarded([this](const Request& req, Response& res) {
            send_json(res, 200, store.load_cohort(req.path_params.at("id")));
          }));

    s.Post("/cohorts/:id/sessions",
           guarded([this](const Request& req, Response& res) { upload(req, res); }));

    s.Get("/cohorts/:id/sessions", guarded([this](const Request& req, Response& res) {
            SessionFilter filter;
            if (req.has_param("group")) filter.group_id = req.get_param_value("group");
            if (req.has_param("week")) {
              auto week = parse_nonnegative(req.get_param_value("week"));
              if (!week || *week < 1 || *week > 1000) throw BadRequest{"week must be in 1..1000"};
              filter.week_number = static_cast<int>(*week);
            }
            send_json(res, 200, store.list_sessions(req.path_params.at("id"), filter));
          }));

    s.Get("/cohorts/:id/participants/:pid/progression",
          guarded([this](const Request& req, Response& res) {
            send_json(res, 200,
                      store.progression_report(req.path_params.at("id"),
                                               req.path_params.at("pid")));
          }));

    s.Get("/sessions/:id", guarded([this](const Request& req, Response& res) {
            send_json(res, 200, store.load_session(req.path_params.at("id")));
          }));

    s.Delete("/sessions/:id", guarded([this](const Request& req, Response& res) {
               store.delete_session(req.path_params.at("id"));
               res.status = 204;
             }));

    s.Get("/sessions/:id/metrics", guarded([this](const Request& req, Response& res) {
            send_json(res, 200, store.load_session(req.path_params.at("id")).metrics);
          }));

    s.Get("/sessions/:id/flow", guarded([this](const Request& req, Response& res) {
            send_json(res, 200, store.load_session(req.path_params.at("id")).metrics.flow);
          }));

    s.Get("/sessions/:id/timeline", guarded([this](const Request& req, Response& res) {
            send_json(res, 200, timeline(store.load_session(req.path_params.at("id"))));
          }));

    s.Get("/sessions/:id/transcript", guarded([this](const Request& req, Response& res) {
            send_json(res, 200, stored_transcript(store.load_session(req.path_params.at("id"))));
          }));

    s.Get("/sessions/:id/seek", guarded([this](const Request& req, Response& res) {
            auto record = store.load_session(req.path_params.at("id"));
            if (!req.has_param("t")) throw BadRequest{"query parameter t is required"};
            auto t = parse_nonnegative(req.get_param_value("t"));
            if (!t) throw BadRequest{"t must be a non-negative integer number of milliseconds"};
            send_json(res, 200, seek(stored_transcript(record), *t));
          }));

    s.Get("/sessions/:id/media",
          guarded([this](const Request& req, Response& res) { media(req, res); }));

    // Unrouted paths and library-generated errors still get an ApiError body.
    s.set_error_handler([](const Request&, Response& res) {
      if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
      if (res.status == 404) {
        send_error(res, 404, "not_found", "no such resource");
      } else if (res.status == 416) {
        send_error(res, 416, "validation_failed", "requested range not satisfiable");
      } else {
        send_error(res, res.status, res.status >= 500 ? "internal" : "validation_failed",
                   httplib::status_message(res.status));
      }
      return httplib::Server::HandlerResponse::Handled;
    });

    if (options.cors) {
      s.set_post_routing_handler([](const Request&, Response& res) {
        res.set_header("Access-Control-Allow-Origin", "*");
        res.set_header("Access-Control-Expose-Headers",
                       "Content-Range, Accept-Ranges, Content-Length, Location");
      });
      s.Options(R"(/.*)", [](const Request&, Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type, Range");
        res.set_header("Access-Control-Max-Age", "600");
        res.status = 204;
      });
    }
  }
};

ApiServer::ApiServer(SessionStore& store, ApiOptions options)
    : impl_(std::make_unique<Impl>(store, std::move(options))) {}

ApiServer::~ApiServer() = default;

bool ApiServer::bind(const std::string& host, int port) {
  if (port == 0) {
    impl_->port = impl_->server.bind_to_any_port(host);
  } else {
    impl_->port = impl_->server.bind_to_port(host, port) ? port : -1;
  }
  return impl_->port > 0;
}

int ApiServer::port() const { return impl_->port; }

bool ApiServer::run() {
  {
    std::lock_guard lock(impl_->run_mu);
    if (impl_->stop_requested) return true;
    impl_->started = true;
  }
  bool ok = impl_->server.listen_after_bind();
  impl_->finished = true;
  return ok;
}

void ApiServer::stop() {
  {
    std::lock_guard lock(impl_->run_mu);
    impl_->stop_requested = true;
    if (!impl_->started) return;
  }
  wait_until_ready();
  impl_->server.stop();
}

void ApiServer::wait_until_ready() const {
  while (!impl_->server.is_running() && !impl_->finished) {
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
}

}  // namespace tandem
