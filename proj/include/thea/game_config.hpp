#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "thea/error.hpp"
#include "thea/gesture.hpp"

namespace thea {

// beats[a][b] == true iff element a beats element b.
struct DominanceMatrix {
  std::array<std::array<bool, kGestureCount>, kGestureCount> beats{};

  bool operator()(Element a, Element b) const { return beats[index_of(a)][index_of(b)]; }

  friend bool operator==(const DominanceMatrix&, const DominanceMatrix&) = default;

  // Each element beats the next two in the cycle
  // Fire -> Metal -> Earth -> Water -> Wood -> Fire.
  static DominanceMatrix five_cycle() {
    constexpr std::array<Element, kGestureCount> cycle{
        Element::Fire, Element::Metal, Element::Earth, Element::Water, Element::Wood};
    DominanceMatrix m;
    for (std::size_t i = 0; i < cycle.size(); ++i) {
      m.beats[index_of(cycle[i])][index_of(cycle[(i + 1) % 5])] = true;
      m.beats[index_of(cycle[i])][index_of(cycle[(i + 2) % 5])] = true;
    }
    return m;
  }
};

// Returns an empty string when the matrix is a regular five-element tournament
// containing Metal > Earth and Fire > Metal, otherwise the first violation.
inline std::string dominance_violation(const DominanceMatrix& m) {
  for (Element a : kAllElements) {
    if (m(a, a)) return std::string(to_string(a)) + " beats itself";
    int wins = 0;
    int losses = 0;
    for (Element b : kAllElements) {
      if (a == b) continue;
      if (m(a, b) == m(b, a))
        return "pair " + std::string(to_string(a)) + "/" + std::string(to_string(b)) +
               " must have exactly one winner";
      wins += m(a, b) ? 1 : 0;
      losses += m(b, a) ? 1 : 0;
    }
    if (wins != 2 || losses != 2)
      return std::string(to_string(a)) + " must beat exactly 2 and lose to exactly 2";
  }
  if (!m(Element::Metal, Element::Earth)) return "Metal must beat Earth";
  if (!m(Element::Fire, Element::Metal)) return "Fire must beat Metal";
  return {};
}

inline void validate(const DominanceMatrix& m) {
  if (auto why = dominance_violation(m); !why.empty())
    throw Error(ErrorCode::InvalidGameConfig, "dominance matrix: " + why);
}

struct GestureMapping {
  Element element = Element::Water;
  int number = 0;
  std::optional<int> channel;  // 1..4; OpenPalm drives none

  friend bool operator==(const GestureMapping&, const GestureMapping&) = default;
};

// Per-game gesture semantics and rule parameters, loaded once per session.
struct GameConfig {
  std::array<GestureMapping, kGestureCount> gestures{};
  DominanceMatrix dominance = DominanceMatrix::five_cycle();
  // Hands that must show the same gesture to strike it in Ídio. Unset means
  // "all hands" for a two-hand session and 3 for three or four hands.
  std::optional<int> strike_threshold;

  static GameConfig defaults() {
    GameConfig c;
    c.gestures[index_of(Gesture::OpenPalm)] = {Element::Water, 5, std::nullopt};
    c.gestures[index_of(Gesture::ThreeFinger)] = {Element::Fire, 1, 1};
    c.gestures[index_of(Gesture::MiddleFinger)] = {Element::Wood, 0, 2};
    c.gestures[index_of(Gesture::WristInward)] = {Element::Earth, 2, 3};
    c.gestures[index_of(Gesture::WristOutward)] = {Element::Metal, 3, 4};
    return c;
  }

  const GestureMapping& mapping(Gesture g) const { return gestures[index_of(g)]; }
  Element element_of(Gesture g) const { return mapping(g).element; }
  int number_of(Gesture g) const { return mapping(g).number; }
  std::optional<int> channel_of(Gesture g) const { return mapping(g).channel; }

  Gesture gesture_for(Element e) const {
    for (Gesture g : kAllGestures)
      if (element_of(g) == e) return g;
    throw Error(ErrorCode::InvalidGameConfig, "no gesture for element");
  }

  std::optional<Gesture> gesture_for_channel(int channel) const {
    for (Gesture g : kAllGestures)
      if (channel_of(g) == channel) return g;
    return std::nullopt;
  }

  std::vector<int> epta_numbers() const {
    std::vector<int> out;
    for (const auto& m : gestures) out.push_back(m.number);
    std::sort(out.begin(), out.end());
    return out;
  }

  int strike_threshold_for(std::size_t hands) const {
    if (strike_threshold) return *strike_threshold;
    return hands <= 2 ? static_cast<int>(hands) : 3;
  }

  friend bool operator==(const GameConfig&, const GameConfig&) = default;
};

inline void validate(const GameConfig& c) {
  std::set<Element> elements;
  std::set<int> numbers;
  std::set<int> channels;
  for (Gesture g : kAllGestures) {
    const auto& m = c.mapping(g);
    elements.insert(m.element);
    if (m.number < 0)
      throw Error(ErrorCode::InvalidGameConfig, "Eptá numbers must be non-negative");
    numbers.insert(m.number);
    if (g == Gesture::OpenPalm) {
      if (m.channel)
        throw Error(ErrorCode::InvalidGameConfig, "OpenPalm must not map to a channel");
    } else {
      if (!m.channel || *m.channel < 1 || *m.channel > 4)
        throw Error(ErrorCode::InvalidGameConfig,
                    std::string(to_string(g)) + " needs a channel in 1..4");
      channels.insert(*m.channel);
    }
  }
  if (elements.size() != kGestureCount)
    throw Error(ErrorCode::InvalidGameConfig, "gesture/element map is not a bijection");
  if (numbers.size() != kGestureCount)
    throw Error(ErrorCode::InvalidGameConfig, "gesture/number map is not a bijection");
  if (channels.size() != 4)
    throw Error(ErrorCode::InvalidGameConfig, "channels 1..4 must each drive one gesture");
  const auto& palm = c.mapping(Gesture::OpenPalm);
  if (palm.element != Element::Water || palm.number != 5)
    throw Error(ErrorCode::InvalidGameConfig, "OpenPalm is fixed to Water and 5");
  validate(c.dominance);
  if (c.strike_threshold && *c.strike_threshold < 2)
    throw Error(ErrorCode::InvalidGameConfig, "strike threshold must be >= 2");
}

// What a gesture stands for in one game.
using GestureMeaning = std::variant<Element, int, Gesture>;

inline GestureMeaning meaning_of(Gesture g, GameKind game, const GameConfig& c) {
  switch (game) {
    case GameKind::Godai: return c.element_of(g);
    case GameKind::Epta: return c.number_of(g);
    case GameKind::Idio: return g;
  }
  return g;
}

inline nlohmann::json to_json(const GameConfig& c) {
  nlohmann::json j;
  for (Gesture g : kAllGestures) {
    const auto& m = c.mapping(g);
    j["gestures"][std::string(to_string(g))] = {
        {"element", std::string(to_string(m.element))},
        {"number", m.number},
        {"channel", m.channel ? nlohmann::json(*m.channel) : nlohmann::json(nullptr)}};
  }
  for (Element a : kAllElements) {
    auto& beaten = j["dominance"][std::string(to_string(a))];
    beaten = nlohmann::json::array();
    for (Element b : kAllElements)
      if (c.dominance(a, b)) beaten.push_back(std::string(to_string(b)));
  }
  j["idio_strike_threshold"] =
      c.strike_threshold ? nlohmann::json(*c.strike_threshold) : nlohmann::json(nullptr);
  return j;
}

// Missing keys fall back to the defaults; the result is validated.
inline GameConfig game_config_from_json(const nlohmann::json& j) {
  GameConfig c = GameConfig::defaults();
  try {
    if (j.contains("gestures")) {
      for (const auto& [name, entry] : j.at("gestures").items()) {
        auto g = parse_gesture(name);
        if (!g) throw Error(ErrorCode::InvalidGameConfig, "unknown gesture " + name);
        auto& m = c.gestures[index_of(*g)];
        if (entry.contains("element")) {
          auto e = parse_element(entry.at("element").get<std::string>());
          if (!e) throw Error(ErrorCode::InvalidGameConfig, "unknown element for " + name);
          m.element = *e;
        }
        if (entry.contains("number")) m.number = entry.at("number").get<int>();
        if (entry.contains("channel")) {
          const auto& ch = entry.at("channel");
          m.channel = ch.is_null() ? std::nullopt : std::optional<int>(ch.get<int>());
        }
      }
    }
    if (j.contains("dominance")) {
      DominanceMatrix m;
      for (const auto& [name, beaten] : j.at("dominance").items()) {
        auto a = parse_element(name);
        if (!a) throw Error(ErrorCode::InvalidGameConfig, "unknown element " + name);
        for (const auto& b_name : beaten) {
          auto b = parse_element(b_name.get<std::string>());
          if (!b) throw Error(ErrorCode::InvalidGameConfig, "unknown element in dominance");
          m.beats[index_of(*a)][index_of(*b)] = true;
        }
      }
      c.dominance = m;
    }
    if (j.contains("idio_strike_threshold") && !j.at("idio_strike_threshold").is_null())
      c.strike_threshold = j.at("idio_strike_threshold").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidGameConfig, e.what());
  }
  validate(c);
  return c;
}

inline GameConfig load_game_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidGameConfig, "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidGameConfig, path + ": " + e.what());
  }
  return game_config_from_json(j);
}

}  // namespace thea
