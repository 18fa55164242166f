#include <gtest/gtest.h>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>
#include <netinet/in.h>

#include <chrono>
#include <cstdlib>
#include <sstream>

#include "fixtures.hpp"
#include "httplib.h"
#include "seven_weeks.hpp"
#include "tandem/cli.hpp"
#include "tandem/json_io.hpp"
#include "tandem/store.hpp"
#include "tandem/transcript.hpp"

extern char** environ;

namespace tandem {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string vtt(const std::string& name) {
  return testing::fixture_path("vtt/" + name).string();
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::istringstream in(line);
  for (std::string f; std::getline(in, f, ',');) fields.push_back(f);
  return fields;
}

// --- analyze ------------------------------------------------------------------------------

TEST(CliAnalyze, JsonMatchesGolden) {
  auto r = cli({"analyze", testing::fixture_path("sample_session.vtt").string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, testing::read_file(testing::fixture_path("golden/sample_session.metrics.json")));
}

TEST(CliAnalyze, OutWritesFile) {
  testing::TempDir dir;
  auto target = dir.path() / "m.json";
  auto r = cli({"analyze", testing::fixture_path("sample_session.vtt").string(), "--out",
                target.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "");
  EXPECT_EQ(testing::read_file(target),
            testing::read_file(testing::fixture_path("golden/sample_session.metrics.json")));
}

TEST(CliAnalyze, CsvSharesSumToOne) {
  auto r = cli({"analyze", testing::fixture_path("sample_session.vtt").string(), "--format", "csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto lines = split_lines(r.out);
  ASSERT_GE(lines.size(), 3u);
  auto header = split_csv(lines[0]);
  ASSERT_EQ(header.size(), 14u);
  EXPECT_EQ(header[0], "speaker");
  EXPECT_EQ(header[2], "share");
  double sum = 0;
  std::size_t i = 1;
  for (; i < lines.size() && !lines[i].empty(); ++i) {
    auto fields = split_csv(lines[i]);
    ASSERT_EQ(fields.size(), header.size()) << lines[i];
    sum += std::stod(fields[2]);
  }
  EXPECT_EQ(i - 1, 4u);
  EXPECT_NEAR(sum, 1.0, 1e-9);
  ASSERT_LT(i + 1, lines.size());
  EXPECT_EQ(lines[i + 1].rfind("from,", 0), 0u);
}

TEST(CliAnalyze, CsvOutWritesFlowAlongside) {
  testing::TempDir dir;
  auto target = dir.path() / "week1.csv";
  auto r = cli({"analyze", testing::fixture_path("sample_session.vtt").string(), "--format", "csv",
                "--out", target.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(split_lines(testing::read_file(target)).size(), 5u);
  auto flow = split_lines(testing::read_file(dir.path() / "week1.flow.csv"));
  EXPECT_EQ(flow.size(), 5u);
  EXPECT_EQ(split_csv(flow[0]).size(), 5u);
}

TEST(CliAnalyze, CsvQuotesAwkwardSpeakers) {
  testing::TempDir dir;
  auto path = dir.path() / "q.vtt";
  testing::write_file(path,
                      "WEBVTT\n\n00:00:00.000 --> 00:00:01.000\nSmith, \"Jo\": hi\n\n"
                      "00:00:01.000 --> 00:00:02.000\nAnn: yo\n");
  auto r = cli({"analyze", path.string(), "--format", "csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("\"Smith, \"\"Jo\"\"\","), std::string::npos) << r.out;
}

TEST(CliAnalyze, ConfigChangesMetrics) {
  testing::TempDir dir;
  auto config = dir.path() / "cfg.json";
  testing::write_file(config, R"({"long_pause_ms": 1})");
  auto sample = testing::fixture_path("sample_session.vtt").string();
  auto plain = Json::parse(cli({"analyze", sample}).out);
  auto r = cli({"analyze", sample, "--config", config.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  auto tuned = Json::parse(r.out);
  EXPECT_EQ(tuned.at("config_used").at("long_pause_ms"), 1);
  EXPECT_NE(tuned.at("per_speaker"), plain.at("per_speaker"));
}

TEST(CliAnalyze, InputErrorsExitOne) {
  testing::TempDir dir;
  auto bad_config = dir.path() / "bad.json";
  testing::write_file(bad_config, R"({"merge_gap_ms": -5})");
  auto sample = testing::fixture_path("sample_session.vtt").string();

  auto headerless = cli({"analyze", vtt("05_missing_header.vtt")});
  EXPECT_EQ(headerless.code, 1);
  EXPECT_EQ(headerless.out, "");
  EXPECT_NE(headerless.err.find("error"), std::string::npos);

  EXPECT_EQ(cli({"analyze", vtt("06_empty_file.vtt")}).code, 1);
  EXPECT_EQ(cli({"analyze", (dir.path() / "missing.vtt").string()}).code, 1);
  EXPECT_EQ(cli({"analyze", sample, "--config", bad_config.string()}).code, 1);
  EXPECT_EQ(cli({"analyze", sample, "--config", (dir.path() / "none.json").string()}).code, 1);
  EXPECT_EQ(cli({"analyze", sample, "--format", "xml"}).code, 1);
  EXPECT_EQ(cli({"analyze"}).code, 1);
  EXPECT_EQ(cli({"frobnicate"}).code, 1);
  EXPECT_EQ(cli({}).code, 1);
}

TEST(CliAnalyze, WarningsGoToStderr) {
  auto r = cli({"analyze", vtt("09_overlap.vtt")});
  EXPECT_EQ(r.code, 0);
  EXPECT_TRUE(Json::accept(r.out));
  EXPECT_NE(r.err.find("09_overlap.vtt:"), std::string::npos);
  EXPECT_NE(r.err.find(": warning: "), std::string::npos);
}

TEST(CliHelp, ExitsZero) {
  auto r = cli({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("analyze"), std::string::npos);
}

// --- validate -----------------------------------------------------------------------------

TEST(CliValidate, CleanFile) {
  auto r = cli({"validate", vtt("01_basic_zoom.vtt")});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find(": ok ("), std::string::npos) << r.out;
}

TEST(CliValidate, WarningsStillPass) {
  auto r = cli({"validate", vtt("09_overlap.vtt")});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("warning"), std::string::npos);
  EXPECT_NE(r.out.find(": ok ("), std::string::npos);
}

TEST(CliValidate, ErrorsFail) {
  for (const char* name :
       {"05_missing_header.vtt", "06_empty_file.vtt", "07_malformed_timestamp.vtt"}) {
    auto r = cli({"validate", vtt(name)});
    EXPECT_EQ(r.code, 1) << name;
    EXPECT_NE(r.out.find(": error: "), std::string::npos) << r.out;
    EXPECT_EQ(r.out.find(": ok"), std::string::npos);
  }
}

TEST(CliValidate, EveryCorpusFileHasDefinedOutcome) {
  for (const auto& entry : fs::directory_iterator(testing::fixture_path("vtt"))) {
    if (entry.path().extension() != ".vtt") continue;
    auto r = cli({"validate", entry.path().string()});
    auto parsed = parse_vtt(testing::read_file(entry.path()));
    EXPECT_EQ(r.code, parsed.has_errors() ? 1 : 0) << entry.path();
  }
}

// --- report -------------------------------------------------------------------------------

class CliReport : public ::testing::Test {
 protected:
  void SetUp() override {
    SessionStore store(dir.path());
    store.create_cohort(fixture.cohort);
    for (const auto& w : fixture.sessions) {
      NewSession s;
      s.session_id = w.session_id;
      s.cohort_id = fixture.cohort.cohort_id;
      s.group_id = w.group_id;
      s.week_number = w.week_number;
      s.recorded_at = w.recorded_at;
      s.speaker_map = w.speaker_map;
      s.transcript_text = w.vtt;
      s.metrics = compute_session_metrics(parse_vtt(w.vtt).transcript, AnalysisConfig{});
      store.save_session(s);
    }
  }

  std::vector<std::string> report_args(std::vector<std::string> extra = {}) {
    std::vector<std::string> args = {"report", "--data-dir", dir.path().string(), "--cohort",
                                     fixture.cohort.cohort_id};
    args.insert(args.end(), extra.begin(), extra.end());
    return args;
  }

  testing::TempDir dir;
  testing::SevenWeekCohort fixture = testing::seven_week_cohort();
};

TEST_F(CliReport, TableHasOneRowPerAttendedWeek) {
  auto r = cli(report_args());
  ASSERT_EQ(r.code, 0) << r.err;
  auto lines = split_lines(r.out);
  ASSERT_FALSE(lines.empty());
  EXPECT_EQ(lines[0].rfind("participant", 0), 0u);
  std::map<std::string, int> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::istringstream in(lines[i]);
    std::string pid;
    in >> pid;
    ++rows[pid];
  }
  ASSERT_EQ(rows.size(), 7u);
  for (const auto& [pid, n] : rows) EXPECT_EQ(n, pid == "psl-louise" ? 6 : 7) << pid;
}

TEST_F(CliReport, TableValuesMatchOracle) {
  auto r = cli(report_args());
  ASSERT_EQ(r.code, 0);
  auto expected = testing::expected_progression(fixture, "dcu-aoife");
  for (const auto& point : expected.at("points")) {
    std::ostringstream share;
    share << std::fixed << std::setprecision(4) << point.at("share").get<double>();
    bool found = false;
    for (const auto& line : split_lines(r.out)) {
      std::istringstream in(line);
      std::string pid, week, session, s;
      in >> pid >> week >> session >> s;
      if (pid == "dcu-aoife" && week == std::to_string(point.at("week_number").get<int>())) {
        EXPECT_EQ(s, share.str());
        found = true;
      }
    }
    EXPECT_TRUE(found);
  }
}

TEST_F(CliReport, JsonMatchesOracle) {
  auto r = cli(report_args({"--format", "json"}));
  ASSERT_EQ(r.code, 0) << r.err;
  auto reports = Json::parse(r.out);
  ASSERT_EQ(reports.size(), fixture.cohort.participants.size());
  for (const auto& report : reports) {
    EXPECT_EQ(report, testing::expected_progression(fixture, report.at("participant_id")));
  }
}

TEST_F(CliReport, WeekFilter) {
  auto r = cli(report_args({"--week", "3", "--format", "json"}));
  ASSERT_EQ(r.code, 0) << r.err;
  for (const auto& report : Json::parse(r.out)) {
    ASSERT_EQ(report.at("points").size(), 1u);
    EXPECT_EQ(report.at("points")[0].at("week_number"), 3);
    ASSERT_EQ(report.at("deltas").size(), 1u);
    EXPECT_EQ(report.at("deltas")[0].at("to_week"), 3);
  }
  auto week5 = Json::parse(cli(report_args({"--week", "5", "--format", "json"})).out);
  for (const auto& report : week5) {
    if (report.at("participant_id") == "psl-louise") {
      EXPECT_TRUE(report.at("points").empty());
    }
  }
  auto table = cli(report_args({"--week", "3"}));
  EXPECT_EQ(split_lines(table.out).size(), 8u);
}

TEST_F(CliReport, Errors) {
  EXPECT_EQ(cli({"report", "--data-dir", dir.path().string(), "--cohort", "nope"}).code, 1);
  EXPECT_EQ(cli({"report", "--data-dir", (dir.path() / "absent").string(), "--cohort", "x"}).code, 1);
  EXPECT_EQ(cli(report_args({"--week", "0"})).code, 1);
  EXPECT_EQ(cli(report_args({"--format", "yaml"})).code, 1);
}

TEST_F(CliReport, DataDirFromEnvironment) {
  ::setenv("TANDEM_DATA_DIR", dir.path().c_str(), 1);
  auto r = cli({"report", "--cohort", fixture.cohort.cohort_id});
  ::unsetenv("TANDEM_DATA_DIR");
  EXPECT_EQ(r.code, 0) << r.err;
}

// --- serve (as a real process) ------------------------------------------------------------

class Child {
 public:
  explicit Child(const std::vector<std::string>& args) {
    int out_pipe[2];
    int err_pipe[2];
    EXPECT_EQ(::pipe(out_pipe), 0);
    EXPECT_EQ(::pipe(err_pipe), 0);
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, out_pipe[1], 1);
    posix_spawn_file_actions_adddup2(&actions, err_pipe[1], 2);
    posix_spawn_file_actions_addclose(&actions, out_pipe[0]);
    posix_spawn_file_actions_addclose(&actions, err_pipe[0]);
    std::vector<std::string> full = {TANDEM_CLI_PATH};
    full.insert(full.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : full) argv.push_back(a.data());
    argv.push_back(nullptr);
    EXPECT_EQ(posix_spawn(&pid_, TANDEM_CLI_PATH, &actions, nullptr, argv.data(), environ), 0);
    posix_spawn_file_actions_destroy(&actions);
    ::close(out_pipe[1]);
    ::close(err_pipe[1]);
    out_fd_ = out_pipe[0];
    err_fd_ = err_pipe[0];
  }

  ~Child() {
    if (pid_ > 0 && !reaped_) {
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, nullptr, 0);
    }
    ::close(out_fd_);
    ::close(err_fd_);
  }

  // Reads stdout until a full line arrives or the timeout passes.
  std::string read_line(std::chrono::milliseconds timeout = std::chrono::seconds(10)) {
    auto deadline = std::chrono::steady_clock::now() + timeout;
    while (true) {
      auto nl = out_buf_.find('\n');
      if (nl != std::string::npos) {
        auto line = out_buf_.substr(0, nl);
        out_buf_.erase(0, nl + 1);
        return line;
      }
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) return {};
      pollfd p{out_fd_, POLLIN, 0};
      if (::poll(&p, 1, static_cast<int>(left.count())) <= 0) return {};
      char buf[512];
      auto n = ::read(out_fd_, buf, sizeof buf);
      if (n <= 0) return {};
      out_buf_.append(buf, static_cast<std::size_t>(n));
    }
  }

  std::string drain_stderr() {
    std::string text;
    char buf[512];
    ssize_t n;
    while ((n = ::read(err_fd_, buf, sizeof buf)) > 0) text.append(buf, static_cast<std::size_t>(n));
    return text;
  }

  void signal(int sig) { ::kill(pid_, sig); }

  // Exit code, or -1 if the process did not exit normally within the timeout.
  int wait(std::chrono::milliseconds timeout = std::chrono::seconds(10)) {
    auto deadline = std::chrono::steady_clock::now() + timeout;
    while (std::chrono::steady_clock::now() < deadline) {
      int status = 0;
      if (::waitpid(pid_, &status, WNOHANG) == pid_) {
        reaped_ = true;
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    return -1;
  }

 private:
  pid_t pid_ = -1;
  int out_fd_ = -1;
  int err_fd_ = -1;
  bool reaped_ = false;
  std::string out_buf_;
};

int port_of(const std::string& listening_line) {
  auto colon = listening_line.rfind(':');
  return colon == std::string::npos ? -1 : std::atoi(listening_line.c_str() + colon + 1);
}

TEST(CliServe, ServesAndStopsCleanlyOnSigterm) {
  testing::TempDir dir;
  Child child({"serve", "--data-dir", dir.path().string(), "--listen", "127.0.0.1:0"});
  auto line = child.read_line();
  ASSERT_EQ(line.rfind("listening on http://127.0.0.1:", 0), 0u) << line;
  int port = port_of(line);
  ASSERT_GT(port, 0);

  httplib::Client client("127.0.0.1", port);
  auto res = client.Get("/cohorts");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(Json::parse(res->body), Json::array());

  auto fixture = testing::seven_week_cohort();
  ASSERT_EQ(client.Post("/cohorts", Json(fixture.cohort).dump(), "application/json")->status, 201);
  auto before = testing::snapshot_tree(dir.path());

  child.signal(SIGTERM);
  EXPECT_EQ(child.wait(), 0);
  EXPECT_EQ(child.read_line(), "shut down cleanly");
  EXPECT_EQ(testing::snapshot_tree(dir.path()), before);
  SessionStore reopened(dir.path());
  EXPECT_EQ(reopened.load_cohort(fixture.cohort.cohort_id), fixture.cohort);
}

TEST(CliServe, SigintAlsoStops) {
  testing::TempDir dir;
  Child child({"serve", "--data-dir", dir.path().string(), "--listen", "127.0.0.1:0"});
  ASSERT_GT(port_of(child.read_line()), 0);
  child.signal(SIGINT);
  EXPECT_EQ(child.wait(), 0);
}

TEST(CliServe, OccupiedPortFails) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  ASSERT_GE(fd, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ASSERT_EQ(::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr), 0);
  ASSERT_EQ(::listen(fd, 1), 0);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  int port = ntohs(addr.sin_port);

  testing::TempDir dir;
  Child child({"serve", "--data-dir", dir.path().string(), "--listen",
               "127.0.0.1:" + std::to_string(port)});
  EXPECT_EQ(child.wait(), 1);
  EXPECT_NE(child.drain_stderr().find("cannot listen"), std::string::npos);
  ::close(fd);
}

TEST(CliServe, BadArgumentsFail) {
  testing::TempDir dir;
  EXPECT_EQ(cli({"serve", "--data-dir", dir.path().string(), "--listen", "nonsense"}).code, 1);
  EXPECT_EQ(cli({"serve", "--data-dir", dir.path().string(), "--listen", "127.0.0.1:99999"}).code, 1);
  auto config = dir.path() / "c.json";
  testing::write_file(config, "[1,2]");
  EXPECT_EQ(cli({"serve", "--data-dir", dir.path().string(), "--config", config.string()}).code, 1);
}

TEST(CliServe, ListenFromEnvironment) {
  testing::TempDir dir;
  ::setenv("TANDEM_LISTEN", "127.0.0.1:0", 1);
  Child child({"serve", "--data-dir", dir.path().string()});
  ::unsetenv("TANDEM_LISTEN");
  auto line = child.read_line();
  EXPECT_GT(port_of(line), 0) << line;
  child.signal(SIGTERM);
  EXPECT_EQ(child.wait(), 0);
}

}  // namespace
}  // namespace tandem
