#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "thea/control_loop.hpp"
#include "thea/error.hpp"
#include "thea/game_config.hpp"
#include "thea/game_core.hpp"
#include "thea/gesture.hpp"

namespace thea {

// Solo: one spectator wears both devices. Shared: two spectators, the first
// nickname wears the left device and the second the right.
enum class Assignment : std::uint8_t { SoloTwoHands, SharedOneHandEach };

constexpr std::string_view to_string(Assignment a) {
  return a == Assignment::SoloTwoHands ? "solo" : "shared";
}

inline std::optional<Assignment> parse_assignment(std::string_view s) {
  if (s == "solo") return Assignment::SoloTwoHands;
  if (s == "shared") return Assignment::SharedOneHandEach;
  return std::nullopt;
}

struct SessionConfig {
  std::vector<std::string> nicknames{"player"};
  GameKind game = GameKind::Godai;
  GodaiMode mode = GodaiMode::BestOf3;
  control::SoundMode sound = control::SoundMode::TwoPitch;
  std::uint64_t seed = 0;
  Assignment assignment = Assignment::SoloTwoHands;
  control::TimingConfig timing;
  GameConfig game_config = GameConfig::defaults();
  // Optional preset gestures, one list per round ([left, right], or the
  // turn hand alone in Eptá). Random draws take over once it runs out.
  std::vector<std::vector<Gesture>> deck;

  // Nickname of whoever wears the given hand's device.
  const std::string& wearer(HandSide side) const {
    if (assignment == Assignment::SharedOneHandEach) return nicknames.at(index_of(side));
    return nicknames.front();
  }
};

inline void validate(const SessionConfig& c) {
  if (c.nicknames.empty() || c.nicknames.size() > 2)
    throw Error(ErrorCode::InvalidConfig, "a session has one or two nicknames");
  for (const auto& n : c.nicknames)
    if (n.empty()) throw Error(ErrorCode::InvalidConfig, "nicknames must not be empty");
  if (c.assignment == Assignment::SharedOneHandEach && c.nicknames.size() != 2)
    throw Error(ErrorCode::InvalidConfig, "a shared session needs two nicknames");
  if (c.assignment == Assignment::SoloTwoHands && c.nicknames.size() != 1)
    throw Error(ErrorCode::InvalidConfig, "a solo session has exactly one nickname");
  if (c.game != GameKind::Godai && c.mode != GodaiMode::FreePlay)
    throw Error(ErrorCode::InvalidConfig,
                std::string(to_string(c.game)) + " only offers free play");
  control::validate(c.timing);
  validate(c.game_config);
  const std::size_t hands = c.game == GameKind::Epta ? 1 : 2;
  for (const auto& round : c.deck)
    if (round.size() != hands)
      throw Error(ErrorCode::InvalidConfig, "each deck round needs " + std::to_string(hands) + " gestures");
}

inline nlohmann::json to_json(const SessionConfig& c) {
  nlohmann::json j = {{"nicknames", c.nicknames},
          {"game", std::string(to_string(c.game))},
          {"mode", std::string(to_string(c.mode))},
          {"sound", std::string(to_string(c.sound))},
          {"seed", c.seed},
          {"assignment", std::string(to_string(c.assignment))},
          {"timing", control::to_json(c.timing)},
          {"game_config", to_json(c.game_config)}};
  if (!c.deck.empty()) {
    auto& deck = j["deck"] = nlohmann::json::array();
    for (const auto& round : c.deck) {
      nlohmann::json names = nlohmann::json::array();
      for (Gesture g : round) names.push_back(std::string(to_string(g)));
      deck.push_back(names);
    }
  }
  return j;
}

// Missing fields take their defaults; Eptá and Ídio default to free play.
inline SessionConfig session_config_from_json(const nlohmann::json& j) {
  SessionConfig c;
  try {
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "session config must be an object");
    if (j.contains("nicknames")) c.nicknames = j.at("nicknames").get<std::vector<std::string>>();
    if (j.contains("game")) {
      auto g = parse_game_kind(j.at("game").get<std::string>());
      if (!g) throw Error(ErrorCode::InvalidConfig, "unknown game");
      c.game = *g;
      if (c.game != GameKind::Godai) c.mode = GodaiMode::FreePlay;
    }
    if (j.contains("mode")) {
      auto m = parse_godai_mode(j.at("mode").get<std::string>());
      if (!m) throw Error(ErrorCode::InvalidConfig, "unknown mode");
      c.mode = *m;
    }
    if (j.contains("sound")) {
      auto s = control::parse_sound_mode(j.at("sound").get<std::string>());
      if (!s) throw Error(ErrorCode::InvalidConfig, "unknown sound mode");
      c.sound = *s;
    }
    c.seed = j.value("seed", c.seed);
    if (j.contains("assignment")) {
      auto a = parse_assignment(j.at("assignment").get<std::string>());
      if (!a) throw Error(ErrorCode::InvalidConfig, "unknown assignment");
      c.assignment = *a;
    } else if (c.nicknames.size() == 2) {
      c.assignment = Assignment::SharedOneHandEach;
    }
    if (j.contains("timing")) c.timing = control::timing_from_json(j.at("timing"));
    if (j.contains("game_config")) c.game_config = game_config_from_json(j.at("game_config"));
    if (j.contains("deck"))
      for (const auto& round : j.at("deck")) {
        auto& out = c.deck.emplace_back();
        for (const auto& name : round) {
          auto g = parse_gesture(name.get<std::string>());
          if (!g) throw Error(ErrorCode::InvalidConfig, "unknown gesture in deck");
          out.push_back(*g);
        }
      }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("session config: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidTiming || e.code() == ErrorCode::InvalidGameConfig)
      throw Error(ErrorCode::InvalidConfig, e.what());
    throw;
  }
  validate(c);
  return c;
}

}  // namespace thea
