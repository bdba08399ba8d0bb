#pragma once

// Engagement statistics folded from session logs: how many plays of each
// game a spectator took part in and how long they lasted. A play is one
// SessionEnded record; its duration is the record's duration_ms. In a shared
// session both wearers are credited.

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "thea/error.hpp"
#include "thea/gesture.hpp"
#include "thea/session_log.hpp"

namespace thea {

struct GameStats {
  int count = 0;
  TimeMs duration_ms = 0;
  friend bool operator==(const GameStats&, const GameStats&) = default;
};

struct PlayerStats {
  std::string player;
  std::array<GameStats, 3> games{};  // indexed by GameKind

  const GameStats& of(GameKind g) const { return games[static_cast<std::size_t>(g)]; }
  friend bool operator==(const PlayerStats&, const PlayerStats&) = default;
};

inline nlohmann::json to_json(const PlayerStats& s) {
  nlohmann::json j = {{"player", s.player}};
  for (GameKind g : {GameKind::Godai, GameKind::Epta, GameKind::Idio})
    j[std::string(to_string(g))] = {{"count", s.of(g).count},
                                    {"duration_ms", s.of(g).duration_ms}};
  return j;
}

// Incremental fold; feed records in log order.
class StatsIndex {
 public:
  void add(const SessionLogRecord& r) {
    if (r.kind == RecordKind::SessionStarted) {
      Session s;
      for (const auto& n : r.detail.at("nicknames")) s.players.insert(n.get<std::string>());
      auto g = parse_game_kind(r.detail.at("game").get<std::string>());
      if (!g) throw Error(ErrorCode::LogFormat, "SessionStarted without a known game");
      s.game = *g;
      sessions_[r.session_id] = std::move(s);
      return;
    }
    if (r.kind != RecordKind::SessionEnded) return;
    auto it = sessions_.find(r.session_id);
    if (it == sessions_.end())
      throw Error(ErrorCode::LogFormat, r.session_id + ": SessionEnded before SessionStarted");
    const auto duration = r.detail.at("duration_ms").get<TimeMs>();
    for (const auto& p : it->second.players) {
      auto& g = totals_[p][static_cast<std::size_t>(it->second.game)];
      ++g.count;
      g.duration_ms += duration;
    }
  }

  void add(const ParsedLog& log) {
    for (const auto& r : log.records) add(r);
  }

  PlayerStats get(const std::string& player) const {
    PlayerStats s{player, {}};
    if (auto it = totals_.find(player); it != totals_.end()) s.games = it->second;
    return s;
  }

  std::vector<std::string> players() const {
    std::vector<std::string> out;
    for (const auto& [p, _] : totals_) out.push_back(p);
    return out;
  }

 private:
  struct Session {
    std::set<std::string> players;
    GameKind game = GameKind::Godai;
  };
  std::map<std::string, Session> sessions_;
  std::map<std::string, std::array<GameStats, 3>> totals_;
};

// ---------------------------------------------------------------------------
// Log directories: one file per session plus index.jsonl listing them, one
// {"session_id": ..., "file": ...} object per line, file relative to the dir.

inline constexpr const char* kIndexFile = "index.jsonl";

struct IndexEntry {
  std::string session_id;
  std::string file;
};

inline std::vector<IndexEntry> read_index(const std::filesystem::path& dir) {
  std::vector<IndexEntry> out;
  std::ifstream in(dir / kIndexFile);
  if (!in) return out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      out.push_back({j.at("session_id").get<std::string>(), j.at("file").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::LogFormat, (dir / kIndexFile).string() + ": " + e.what());
    }
  }
  return out;
}

// Adds a log file to the directory's index unless it is already listed.
inline void index_log(const std::filesystem::path& dir, const std::string& session_id,
                      const std::string& file) {
  for (const auto& e : read_index(dir))
    if (e.file == file) return;
  std::ofstream out(dir / kIndexFile, std::ios::app);
  if (!out) throw Error(ErrorCode::LogFormat, "cannot write " + (dir / kIndexFile).string());
  out << nlohmann::json{{"session_id", session_id}, {"file", file}}.dump() << "\n";
}

inline StatsIndex stats_from_dir(const std::filesystem::path& dir) {
  StatsIndex idx;
  for (const auto& e : read_index(dir)) idx.add(read_log((dir / e.file).string()));
  return idx;
}

}  // namespace thea
