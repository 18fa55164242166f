#include "tandem/transcript.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <numeric>
#include <set>
#include <stdexcept>

#include "tandem/text.hpp"

namespace tandem {
namespace {

constexpr std::string_view kBom = "\xEF\xBB\xBF";
constexpr std::string_view kArrow = "-->";
// The speaker prefix colon must sit within this many characters.
constexpr std::size_t kMaxSpeakerPrefixChars = 64;

struct Line {
  int number;
  std::string_view text;
};

std::vector<Line> split_lines(std::string_view input) {
  std::vector<Line> lines;
  int number = 1;
  std::size_t pos = 0;
  while (pos <= input.size()) {
    auto nl = input.find('\n', pos);
    auto end = nl == std::string_view::npos ? input.size() : nl;
    auto text = input.substr(pos, end - pos);
    if (!text.empty() && text.back() == '\r') text.remove_suffix(1);
    lines.push_back({number++, text});
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return lines;
}

bool is_blank(std::string_view s) { return trim(s).empty(); }

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return c >= '0' && c <= '9';
  });
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
  if (!all_digits(s)) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool starts_block_keyword(std::string_view line, std::string_view keyword) {
  if (!line.starts_with(keyword)) return false;
  auto rest = line.substr(keyword.size());
  return rest.empty() || rest.front() == ' ' || rest.front() == '\t';
}

// Number of UTF-8 code points in `s` (continuation bytes are not counted).
std::size_t utf8_length(std::string_view s) {
  return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) {
    return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
  }));
}

struct TimingLine {
  Millis start;
  Millis end;
};

std::optional<TimingLine> parse_timing_line(std::string_view line) {
  auto arrow = line.find(kArrow);
  if (arrow == std::string_view::npos) return std::nullopt;
  auto left = trim(line.substr(0, arrow));
  auto right = line.substr(arrow + kArrow.size());
  while (!right.empty() && is_space(right.front())) right.remove_prefix(1);
  auto stop = std::find_if(right.begin(), right.end(), is_space);
  auto second = right.substr(0, static_cast<std::size_t>(stop - right.begin()));
  auto start = parse_timestamp(left);
  auto end = parse_timestamp(second);
  if (!start || !end) return std::nullopt;
  return TimingLine{*start, *end};
}

struct SpeakerSplit {
  std::string speaker;
  std::string_view rest;
};

std::optional<SpeakerSplit> split_speaker(std::string_view first_line) {
  auto colon = first_line.find(':');
  if (colon == std::string_view::npos) return std::nullopt;
  if (utf8_length(first_line.substr(0, colon)) >= kMaxSpeakerPrefixChars) {
    return std::nullopt;
  }
  if (colon + 1 >= first_line.size() || first_line[colon + 1] != ' ') {
    return std::nullopt;
  }
  auto name = trim(first_line.substr(0, colon));
  if (name.empty()) return std::nullopt;
  return SpeakerSplit{std::string(name), first_line.substr(colon + 2)};
}

void append_piece(std::string& out, std::string_view piece) {
  piece = trim(piece);
  if (piece.empty()) return;
  if (!out.empty()) out.push_back(' ');
  out.append(piece);
}

struct PendingCue {
  RawCue cue;
  int line_number;
};

}  // namespace

bool ParseResult::has_errors() const {
  return std::any_of(issues.begin(), issues.end(), [](const ParseIssue& i) {
    return i.severity == Severity::kError;
  });
}

std::optional<Millis> parse_timestamp(std::string_view text) {
  // Hours are optional; minutes and seconds are always two digits.
  auto dot = text.rfind('.');
  if (dot == std::string_view::npos || text.size() - dot - 1 != 3) {
    return std::nullopt;
  }
  int millis = 0;
  if (!parse_int(text.substr(dot + 1), millis)) return std::nullopt;

  auto clock = text.substr(0, dot);
  std::vector<std::string_view> parts;
  std::size_t pos = 0;
  while (true) {
    auto colon = clock.find(':', pos);
    parts.push_back(clock.substr(pos, colon == std::string_view::npos
                                          ? std::string_view::npos
                                          : colon - pos));
    if (colon == std::string_view::npos) break;
    pos = colon + 1;
  }
  if (parts.size() < 2 || parts.size() > 3) return std::nullopt;

  std::int64_t hours = 0;
  if (parts.size() == 3) {
    // Nine digits of hours is far beyond any recording and keeps the
    // millisecond total well inside int64.
    if (parts[0].size() > 9 || !parse_int(parts[0], hours)) return std::nullopt;
  }
  auto mm = parts[parts.size() - 2];
  auto ss = parts[parts.size() - 1];
  int minutes = 0;
  int seconds = 0;
  if (mm.size() != 2 || ss.size() != 2 || !parse_int(mm, minutes) ||
      !parse_int(ss, seconds) || minutes > 59 || seconds > 59) {
    return std::nullopt;
  }
  return ((hours * 60 + minutes) * 60 + seconds) * 1000 + millis;
}

std::string format_timestamp(Millis ms) {
  if (ms < 0) ms = 0;
  auto hours = ms / 3'600'000;
  auto minutes = (ms / 60'000) % 60;
  auto seconds = (ms / 1000) % 60;
  auto millis = ms % 1000;
  char buf[48];
  std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld.%03lld",
                static_cast<long long>(hours), static_cast<long long>(minutes),
                static_cast<long long>(seconds), static_cast<long long>(millis));
  return buf;
}

void refresh_derived_fields(Transcript& transcript) {
  transcript.speakers.clear();
  std::set<std::string_view> seen;
  transcript.duration_ms = 0;
  for (const auto& cue : transcript.cues) {
    if (seen.insert(cue.speaker).second) {
      transcript.speakers.push_back(cue.speaker);
    }
    transcript.duration_ms = std::max(transcript.duration_ms, cue.end_ms);
  }
}

ParseResult parse_vtt(std::string_view input, std::string source_name) {
  ParseResult result;
  result.transcript.source_name = std::move(source_name);
  auto& issues = result.issues;

  if (input.starts_with(kBom)) input.remove_prefix(kBom.size());
  auto lines = split_lines(input);

  std::size_t i = 0;
  while (i < lines.size() && is_blank(lines[i].text)) ++i;
  if (i == lines.size() || !lines[i].text.starts_with("WEBVTT")) {
    int at = i < lines.size() ? lines[i].number : 1;
    issues.push_back({at, Severity::kError, "missing WEBVTT header"});
    return result;
  }
  // Header block runs to the first blank line.
  while (i < lines.size() && !is_blank(lines[i].text)) ++i;

  std::vector<PendingCue> pending;
  while (i < lines.size()) {
    while (i < lines.size() && is_blank(lines[i].text)) ++i;
    if (i == lines.size()) break;
    std::vector<Line> block;
    while (i < lines.size() && !is_blank(lines[i].text)) block.push_back(lines[i++]);

    auto first = block.front().text;
    if (starts_block_keyword(first, "NOTE") || trim(first) == "STYLE" ||
        trim(first) == "REGION") {
      continue;
    }

    std::size_t timing_at = 0;
    std::optional<std::string_view> identifier;
    if (first.find(kArrow) == std::string_view::npos) {
      if (block.size() < 2) {
        issues.push_back({block.front().number, Severity::kError,
                          "cue block without a timestamp line"});
        continue;
      }
      identifier = trim(first);
      timing_at = 1;
    }

    const auto& timing_line = block[timing_at];
    auto timing = parse_timing_line(timing_line.text);
    if (!timing) {
      issues.push_back({timing_line.number, Severity::kError,
                        "malformed timestamp line: " + std::string(trim(timing_line.text))});
      continue;
    }
    if (timing->end <= timing->start) {
      issues.push_back({timing_line.number, Severity::kError,
                        "cue end is not after its start"});
      continue;
    }

    RawCue cue;
    cue.start_ms = timing->start;
    cue.end_ms = timing->end;
    if (std::int64_t n = 0; identifier && parse_int(*identifier, n)) cue.index = n;

    if (timing_at + 1 < block.size()) {
      auto head = block[timing_at + 1].text;
      while (!head.empty() && is_space(head.front())) head.remove_prefix(1);
      if (auto split = split_speaker(head)) {
        cue.speaker = std::move(split->speaker);
        head = split->rest;
      }
      append_piece(cue.text, head);
      for (std::size_t k = timing_at + 2; k < block.size(); ++k) {
        append_piece(cue.text, block[k].text);
      }
    }
    if (cue.text.empty()) {
      issues.push_back({timing_line.number, Severity::kWarning,
                        "empty cue payload dropped"});
      continue;
    }
    pending.push_back({std::move(cue), timing_line.number});
  }

  auto cue_order = [](const PendingCue& a, const PendingCue& b) {
    if (a.cue.start_ms != b.cue.start_ms) return a.cue.start_ms < b.cue.start_ms;
    return a.cue.end_ms < b.cue.end_ms;
  };
  if (!std::is_sorted(pending.begin(), pending.end(), cue_order)) {
    issues.push_back({0, Severity::kWarning, "cues out of order; re-sorted by start time"});
    std::stable_sort(pending.begin(), pending.end(), cue_order);
  }

  Millis reach = 0;
  bool any = false;
  for (auto& p : pending) {
    if (any && p.cue.start_ms < reach) {
      issues.push_back({p.line_number, Severity::kWarning,
                        "cue overlaps an earlier cue"});
    }
    reach = any ? std::max(reach, p.cue.end_ms) : p.cue.end_ms;
    any = true;
    result.transcript.cues.push_back(std::move(p.cue));
  }
  refresh_derived_fields(result.transcript);

  std::stable_sort(issues.begin(), issues.end(),
                   [](const ParseIssue& a, const ParseIssue& b) {
                     return a.line_number < b.line_number;
                   });
  return result;
}

std::string serialize_vtt(const Transcript& transcript) {
  std::string out = "WEBVTT\n";
  std::size_t n = 0;
  for (const auto& cue : transcript.cues) {
    out += '\n';
    out += std::to_string(++n);
    out += '\n';
    out += format_timestamp(cue.start_ms);
    out += " --> ";
    out += format_timestamp(cue.end_ms);
    out += '\n';
    // The unknown sentinel is written as a prefix too so the payload can
    // never be re-read as a different speaker.
    out += cue.speaker;
    out += ": ";
    out += cue.text;
    out += '\n';
  }
  return out;
}

Transcript normalize_speakers(const Transcript& transcript,
                              const std::map<std::string, std::string>& alias_map) {
  auto key_of = [](std::string_view label) {
    return to_lower(collapse_whitespace(label));
  };
  std::map<std::string, std::string> by_key;
  for (const auto& [from, to] : alias_map) {
    if (trim(to).empty()) {
      throw std::invalid_argument("alias for '" + from + "' maps to an empty label");
    }
    auto [it, inserted] = by_key.emplace(key_of(from), to);
    if (!inserted && it->second != to) {
      throw std::invalid_argument("label '" + from + "' maps to both '" +
                                  it->second + "' and '" + to + "'");
    }
  }

  Transcript out = transcript;
  if (by_key.empty()) return out;
  for (auto& cue : out.cues) {
    if (auto it = by_key.find(key_of(cue.speaker)); it != by_key.end()) {
      cue.speaker = it->second;
    }
  }
  refresh_derived_fields(out);
  return out;
}

std::vector<ParseIssue> validate(const Transcript& transcript) {
  std::vector<ParseIssue> issues;
  const auto& cues = transcript.cues;
  if (transcript.speakers.empty()) {
    issues.push_back({0, Severity::kWarning, "no speakers"});
    return issues;
  }

  auto unknown = std::count_if(cues.begin(), cues.end(), [](const RawCue& c) {
    return c.speaker == kUnknownSpeaker;
  });
  double ratio = static_cast<double>(unknown) / static_cast<double>(cues.size());
  if (ratio > kMaxUnknownSpeakerRatio) {
    issues.push_back({0, Severity::kWarning,
                      "unknown speaker ratio " + std::to_string(unknown) + "/" +
                          std::to_string(cues.size()) + " exceeds 40%"});
  }

  for (std::size_t k = 0; k < cues.size(); ++k) {
    if (cues[k].duration() > kOverlongCueMs) {
      issues.push_back({0, Severity::kWarning,
                        "overlong cue #" + std::to_string(k) + " (" +
                            std::to_string(cues[k].duration()) + " ms)"});
    }
  }

  // Speech is measured as the union of cue intervals.
  Millis covered = 0;
  Millis run_start = 0;
  Millis run_end = -1;
  for (const auto& cue : cues) {
    if (cue.start_ms > run_end) {
      if (run_end > run_start) covered += run_end - run_start;
      run_start = cue.start_ms;
      run_end = cue.end_ms;
    } else {
      run_end = std::max(run_end, cue.end_ms);
    }
  }
  if (run_end > run_start) covered += run_end - run_start;
  if (transcript.duration_ms > 0 &&
      static_cast<double>(covered) <
          kMinSpeechCoverage * static_cast<double>(transcript.duration_ms)) {
    issues.push_back({0, Severity::kWarning,
                      "low speech coverage: " + std::to_string(covered) + " of " +
                          std::to_string(transcript.duration_ms) + " ms"});
  }
  return issues;
}

}  // namespace tandem
