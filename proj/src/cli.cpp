#include "tandem/cli.hpp"

#include <pthread.h>
#include <signal.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "tandem/api.hpp"
#include "tandem/json_io.hpp"
#include "tandem/store.hpp"

namespace tandem {
namespace {

namespace fs = std::filesystem;

constexpr int kOk = 0;
constexpr int kInputError = 1;
constexpr int kInternalError = 2;

// Thrown for anything the user can fix: missing files, bad flags, bad input.
struct InputError {
  std::string message;
};

std::string read_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError{"cannot read '" + path + "'"};
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_output(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw InputError{"cannot write '" + path.string() + "'"};
}

AnalysisConfig config_from(const std::string& path) {
  if (path.empty()) return {};
  try {
    return load_config(path);
  } catch (const std::invalid_argument& e) {
    throw InputError{e.what()};
  }
}

void print_issues(std::ostream& os, const std::string& source,
                  const std::vector<ParseIssue>& issues) {
  for (const auto& issue : issues) {
    os << source << ":" << issue.line_number << ": " << to_string(issue.severity) << ": "
       << issue.message << "\n";
  }
}

// Shortest text that reads back to the same double.
std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos && (s.empty() || (s.front() != ' ' && s.back() != ' '))) {
    return s;
  }
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

// One row per speaker, columns in SpeakerMetrics order with the language
// breakdown flattened.
std::string metrics_csv(const SessionMetrics& m) {
  std::ostringstream os;
  os << "speaker,speaking_ms,share,floor_turn_count,backchannel_count,mean_floor_turn_ms,"
        "longest_floor_turn_ms,word_count,words_per_minute,filled_pause_count,"
        "long_pauses_after,language_ms_fr,language_ms_en,language_ms_unknown\n";
  for (const auto& [label, s] : m.per_speaker) {
    os << csv_field(label) << ',' << s.speaking_ms << ',' << format_double(s.share) << ','
       << s.floor_turn_count << ',' << s.backchannel_count << ','
       << format_double(s.mean_floor_turn_ms) << ',' << s.longest_floor_turn_ms << ','
       << s.word_count << ',' << format_double(s.words_per_minute) << ','
       << s.filled_pause_count << ',' << s.long_pauses_after << ',' << s.language_ms.fr << ','
       << s.language_ms.en << ',' << s.language_ms.unknown << "\n";
  }
  return os.str();
}

// Square matrix: the header row names the next speaker, the first column
// the previous one.
std::string flow_csv(const FlowMatrix& flow) {
  std::ostringstream os;
  os << "from";
  for (const auto& s : flow.speakers) os << ',' << csv_field(s);
  os << "\n";
  for (std::size_t i = 0; i < flow.speakers.size(); ++i) {
    os << csv_field(flow.speakers[i]);
    for (auto c : flow.counts[i]) os << ',' << c;
    os << "\n";
  }
  return os.str();
}

struct AnalyzeArgs {
  std::string transcript;
  std::string config;
  std::string format = "json";
  std::string out;
};

int analyze(const AnalyzeArgs& a, std::ostream& out, std::ostream& err) {
  auto parsed = parse_vtt(read_input(a.transcript), fs::path(a.transcript).filename().string());
  print_issues(err, a.transcript, parsed.issues);
  if (parsed.has_errors()) {
    err << "error: '" << a.transcript << "' could not be parsed\n";
    return kInputError;
  }
  auto metrics = compute_session_metrics(parsed.transcript, config_from(a.config));

  if (a.format == "json") {
    auto text = dump_canonical(metrics);
    if (a.out.empty()) {
      out << text;
    } else {
      write_output(a.out, text);
    }
    return kOk;
  }
  if (a.out.empty()) {
    out << metrics_csv(metrics) << "\n" << flow_csv(metrics.flow);
  } else {
    fs::path path = a.out;
    write_output(path, metrics_csv(metrics));
    write_output(path.parent_path() / (path.stem().string() + ".flow.csv"),
                 flow_csv(metrics.flow));
  }
  return kOk;
}

int validate_cmd(const std::string& path, std::ostream& out) {
  auto parsed = parse_vtt(read_input(path), fs::path(path).filename().string());
  auto issues = parsed.issues;
  if (!parsed.has_errors()) {
    for (auto& issue : validate(parsed.transcript)) issues.push_back(std::move(issue));
  }
  print_issues(out, path, issues);
  if (parsed.has_errors()) return kInputError;
  out << path << ": ok (" << parsed.transcript.cues.size() << " cues, "
      << parsed.transcript.speakers.size() << " speakers)\n";
  return kOk;
}

std::pair<std::string, int> split_listen(const std::string& listen) {
  auto colon = listen.rfind(':');
  if (colon == std::string::npos || colon == 0) {
    throw InputError{"--listen must look like host:port, got '" + listen + "'"};
  }
  auto host = listen.substr(0, colon);
  if (host.size() > 2 && host.front() == '[' && host.back() == ']') {
    host = host.substr(1, host.size() - 2);
  }
  int port = -1;
  auto digits = listen.substr(colon + 1);
  auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
  if (ec != std::errc() || end != digits.data() + digits.size() || port < 0 || port > 65535) {
    throw InputError{"invalid port in --listen '" + listen + "'"};
  }
  return {host, port};
}

struct ServeArgs {
  std::string data_dir;
  std::string listen = "127.0.0.1:8080";
  std::string config;
  bool cors = false;
};

int serve(const ServeArgs& a, std::ostream& out, std::ostream& err) {
  auto [host, port] = split_listen(a.listen);
  ApiOptions options;
  options.config = config_from(a.config);
  options.cors = a.cors;
  SessionStore store(a.data_dir);
  ApiServer server(store, options);
  if (!server.bind(host, port)) {
    err << "error: cannot listen on " << a.listen << " (address in use or unavailable)\n";
    return kInputError;
  }

  // SIGINT and SIGTERM are taken synchronously by a watcher thread; every
  // thread started after this point inherits the blocked mask.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  sigset_t previous;
  pthread_sigmask(SIG_BLOCK, &signals, &previous);
  std::atomic<bool> finished{false};
  std::thread watcher([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    if (!finished) server.stop();
  });

  out << "listening on http://" << host << ":" << server.port() << std::endl;
  bool ran = server.run();
  finished = true;
  // Wake the watcher if the server stopped on its own.
  pthread_kill(watcher.native_handle(), SIGTERM);
  watcher.join();
  pthread_sigmask(SIG_SETMASK, &previous, nullptr);
  if (!ran) {
    err << "error: server stopped unexpectedly\n";
    return kInternalError;
  }
  out << "shut down cleanly" << std::endl;
  return kOk;
}

struct ReportArgs {
  std::string data_dir;
  std::string cohort;
  int week = 0;
  std::string format = "table";
};

std::string table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& row : rows) {
    width.resize(std::max(width.size(), row.size()));
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream os;
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) line += "  ";
      line += row[c];
      if (c + 1 < row.size()) line.append(width[c] - row[c].size(), ' ');
    }
    os << line << "\n";
  }
  return os.str();
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

int report(const ReportArgs& a, std::ostream& out, std::ostream& err) {
  if (!fs::is_directory(a.data_dir)) throw InputError{"no data directory at '" + a.data_dir + "'"};
  if (a.week < 0) throw InputError{"--week must be >= 1"};
  SessionStore store(a.data_dir);
  Cohort cohort;
  try {
    cohort = store.load_cohort(a.cohort);
  } catch (const StoreError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }

  std::vector<ProgressionReport> reports;
  for (const auto& p : cohort.participants) {
    auto r = store.progression_report(cohort.cohort_id, p.participant_id);
    if (a.week > 0) {
      std::erase_if(r.points, [&](const ProgressionPoint& x) { return x.week_number != a.week; });
      std::erase_if(r.deltas, [&](const ProgressionDelta& d) { return d.to_week != a.week; });
    }
    reports.push_back(std::move(r));
  }

  if (a.format == "json") {
    out << dump_canonical(reports);
    return kOk;
  }
  std::vector<std::vector<std::string>> rows = {
      {"participant", "week", "session", "share", "share_delta", "floor_turns", "speaking_ms",
       "filled_pauses"}};
  for (const auto& r : reports) {
    for (const auto& point : r.points) {
      std::string delta = "-";
      for (const auto& d : r.deltas) {
        if (d.to_week == point.week_number) delta = (d.share >= 0 ? "+" : "") + fixed(d.share, 4);
      }
      rows.push_back({r.participant_id, std::to_string(point.week_number), point.session_id,
                      fixed(point.share, 4), delta, std::to_string(point.floor_turn_count),
                      std::to_string(point.speaking_ms), std::to_string(point.filled_pause_count)});
    }
  }
  out << table(rows);
  return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Conversation metrics for multi-party language-exchange transcripts", "tandem"};
  app.require_subcommand(1);

  AnalyzeArgs analyze_args;
  auto* analyze_cmd = app.add_subcommand("analyze", "Compute session metrics for one transcript");
  analyze_cmd->add_option("transcript", analyze_args.transcript, "WebVTT transcript")->required();
  analyze_cmd->add_option("--config", analyze_args.config, "Analysis config (JSON object)")
      ->envname("TANDEM_CONFIG");
  analyze_cmd->add_option("--format", analyze_args.format, "json or csv")
      ->check(CLI::IsMember({"json", "csv"}));
  analyze_cmd->add_option("--out", analyze_args.out,
                          "Output file; with csv the flow matrix goes to <stem>.flow.csv");

  std::string validate_path;
  auto* validate_sub = app.add_subcommand("validate", "Report parse and sanity issues");
  validate_sub->add_option("transcript", validate_path, "WebVTT transcript")->required();

  ServeArgs serve_args;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP API");
  serve_cmd->add_option("--data-dir", serve_args.data_dir, "Store directory")
      ->envname("TANDEM_DATA_DIR")
      ->required();
  serve_cmd->add_option("--listen", serve_args.listen, "host:port (port 0 picks one)")
      ->envname("TANDEM_LISTEN")
      ->capture_default_str();
  serve_cmd->add_option("--config", serve_args.config, "Analysis config (JSON object)")
      ->envname("TANDEM_CONFIG");
  serve_cmd->add_flag("--cors", serve_args.cors, "Send permissive cross-origin headers");

  ReportArgs report_args;
  auto* report_cmd = app.add_subcommand("report", "Per-participant weekly summary");
  report_cmd->add_option("--data-dir", report_args.data_dir, "Store directory")
      ->envname("TANDEM_DATA_DIR")
      ->required();
  report_cmd->add_option("--cohort", report_args.cohort, "Cohort id")->required();
  report_cmd->add_option("--week", report_args.week, "Only this week")
      ->check(CLI::PositiveNumber);
  report_cmd->add_option("--format", report_args.format, "table or json")
      ->check(CLI::IsMember({"table", "json"}));

  // CLI11 consumes vectors back to front.
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*analyze_cmd) return analyze(analyze_args, out, err);
    if (*validate_sub) return validate_cmd(validate_path, out);
    if (*serve_cmd) return serve(serve_args, out, err);
    if (*report_cmd) return report(report_args, out, err);
  } catch (const InputError& e) {
    err << "error: " << e.message << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternalError;
  }
  return kInternalError;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace tandem
