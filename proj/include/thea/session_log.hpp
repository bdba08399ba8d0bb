#pragma once

// Session log records. One JSON object per line:
//
//   header  {"type":"header","session_id":...,"clock":"virtual"|"wall",
//            "seed":...,"config":{...},"script":[...],"rng":...}
//   record  {"type":"record","seq":N,"t_ms":T,"session_id":...,
//            "kind":"<RecordKind>","detail":{...}}
//
// Records are append-only; seq strictly increases and t_ms never decreases.
// docs/log_format.md lists the detail fields of every kind.

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "thea/clock.hpp"
#include "thea/error.hpp"

namespace thea {

enum class RecordKind : std::uint8_t {
  SessionStarted,
  PhaseChanged,
  GestureShown,
  RoundResolved,
  RevealUsed,
  Paused,
  Resumed,
  KillSwitch,
  UsageLimit,
  SessionEnded,
};

constexpr std::string_view to_string(RecordKind k) {
  switch (k) {
    case RecordKind::SessionStarted: return "SessionStarted";
    case RecordKind::PhaseChanged: return "PhaseChanged";
    case RecordKind::GestureShown: return "GestureShown";
    case RecordKind::RoundResolved: return "RoundResolved";
    case RecordKind::RevealUsed: return "RevealUsed";
    case RecordKind::Paused: return "Paused";
    case RecordKind::Resumed: return "Resumed";
    case RecordKind::KillSwitch: return "KillSwitch";
    case RecordKind::UsageLimit: return "UsageLimit";
    case RecordKind::SessionEnded: return "SessionEnded";
  }
  return "?";
}

inline std::optional<RecordKind> parse_record_kind(std::string_view s) {
  for (int i = 0; i <= static_cast<int>(RecordKind::SessionEnded); ++i)
    if (to_string(static_cast<RecordKind>(i)) == s) return static_cast<RecordKind>(i);
  return std::nullopt;
}

// A record before the host stamps it with time, session and sequence number.
struct LogEntry {
  RecordKind kind;
  nlohmann::json detail = nlohmann::json::object();

  friend bool operator==(const LogEntry&, const LogEntry&) = default;
};

struct SessionLogRecord {
  std::uint64_t seq = 0;
  TimeMs t_ms = 0;
  std::string session_id;
  RecordKind kind = RecordKind::SessionStarted;
  nlohmann::json detail = nlohmann::json::object();

  friend bool operator==(const SessionLogRecord&, const SessionLogRecord&) = default;
};

inline nlohmann::json to_json(const SessionLogRecord& r) {
  return {{"type", "record"},
          {"seq", r.seq},
          {"t_ms", r.t_ms},
          {"session_id", r.session_id},
          {"kind", std::string(to_string(r.kind))},
          {"detail", r.detail}};
}

inline SessionLogRecord record_from_json(const nlohmann::json& j) {
  try {
    SessionLogRecord r;
    r.seq = j.at("seq").get<std::uint64_t>();
    r.t_ms = j.at("t_ms").get<TimeMs>();
    r.session_id = j.at("session_id").get<std::string>();
    auto kind = parse_record_kind(j.at("kind").get<std::string>());
    if (!kind) throw Error(ErrorCode::LogFormat, "unknown record kind");
    r.kind = *kind;
    r.detail = j.value("detail", nlohmann::json::object());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::LogFormat, e.what());
  }
}

// Serialised form used for log lines: keys sorted, no whitespace, so equal
// logs are byte-identical.
inline std::string log_line(const nlohmann::json& j) { return j.dump(); }

struct ParsedLog {
  nlohmann::json header;
  std::vector<SessionLogRecord> records;
};

inline ParsedLog parse_log(std::istream& in, const std::string& name = "log") {
  ParsedLog out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::LogFormat, name + ":" + std::to_string(lineno) + ": " + e.what());
    }
    const auto type = j.value("type", "");
    if (type == "header") {
      if (!out.header.is_null())
        throw Error(ErrorCode::LogFormat, name + ": more than one header");
      out.header = std::move(j);
    } else if (type == "record") {
      out.records.push_back(record_from_json(j));
    } else {
      throw Error(ErrorCode::LogFormat, name + ":" + std::to_string(lineno) + ": unknown line type");
    }
  }
  if (out.header.is_null()) throw Error(ErrorCode::LogFormat, name + ": missing header");
  return out;
}

inline ParsedLog read_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::LogFormat, "cannot open " + path);
  return parse_log(in, path);
}

}  // namespace thea
