#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace thea {

// The five EMS-actuated hand gestures. Every game, channel, sound and screen
// refers to these.
enum class Gesture : std::uint8_t {
  OpenPalm,
  ThreeFinger,
  MiddleFinger,
  WristInward,
  WristOutward,
};

inline constexpr std::size_t kGestureCount = 5;

inline constexpr std::array<Gesture, kGestureCount> kAllGestures{
    Gesture::OpenPalm, Gesture::ThreeFinger, Gesture::MiddleFinger,
    Gesture::WristInward, Gesture::WristOutward};

enum class Element : std::uint8_t { Wood, Fire, Earth, Metal, Water };

inline constexpr std::array<Element, kGestureCount> kAllElements{
    Element::Wood, Element::Fire, Element::Earth, Element::Metal, Element::Water};

enum class GameKind : std::uint8_t { Godai, Epta, Idio };

enum class HandSide : std::uint8_t { Left, Right };

inline constexpr std::array<HandSide, 2> kBothSides{HandSide::Left, HandSide::Right};

constexpr HandSide other(HandSide s) {
  return s == HandSide::Left ? HandSide::Right : HandSide::Left;
}

constexpr std::size_t index_of(HandSide s) { return static_cast<std::size_t>(s); }
constexpr std::size_t index_of(Gesture g) { return static_cast<std::size_t>(g); }
constexpr std::size_t index_of(Element e) { return static_cast<std::size_t>(e); }

// A hand in a running session. In solo play both hands share a wearer; in the
// shared configuration each participant wears one device.
struct HandId {
  HandSide side = HandSide::Left;
  std::string wearer;

  friend bool operator==(const HandId&, const HandId&) = default;
};

// How completely an actuation rendered its gesture. Unknown marks an
// actuation whose completion report never arrived.
enum class Completeness : std::uint8_t { Complete = 0, Partial = 1, None = 2, Unknown = 3 };

constexpr std::string_view to_string(Completeness c) {
  switch (c) {
    case Completeness::Complete: return "Complete";
    case Completeness::Partial: return "Partial";
    case Completeness::None: return "None";
    case Completeness::Unknown: return "Unknown";
  }
  return "?";
}

constexpr std::string_view to_string(Gesture g) {
  switch (g) {
    case Gesture::OpenPalm: return "OpenPalm";
    case Gesture::ThreeFinger: return "ThreeFinger";
    case Gesture::MiddleFinger: return "MiddleFinger";
    case Gesture::WristInward: return "WristInward";
    case Gesture::WristOutward: return "WristOutward";
  }
  return "?";
}

constexpr std::string_view to_string(Element e) {
  switch (e) {
    case Element::Wood: return "Wood";
    case Element::Fire: return "Fire";
    case Element::Earth: return "Earth";
    case Element::Metal: return "Metal";
    case Element::Water: return "Water";
  }
  return "?";
}

constexpr std::string_view to_string(GameKind k) {
  switch (k) {
    case GameKind::Godai: return "godai";
    case GameKind::Epta: return "epta";
    case GameKind::Idio: return "idio";
  }
  return "?";
}

constexpr std::string_view to_string(HandSide s) {
  return s == HandSide::Left ? "left" : "right";
}

inline std::optional<Gesture> parse_gesture(std::string_view s) {
  for (Gesture g : kAllGestures)
    if (to_string(g) == s) return g;
  return std::nullopt;
}

inline std::optional<Element> parse_element(std::string_view s) {
  for (Element e : kAllElements)
    if (to_string(e) == s) return e;
  return std::nullopt;
}

inline std::optional<GameKind> parse_game_kind(std::string_view s) {
  for (GameKind k : {GameKind::Godai, GameKind::Epta, GameKind::Idio})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

inline std::optional<HandSide> parse_hand_side(std::string_view s) {
  if (s == "left") return HandSide::Left;
  if (s == "right") return HandSide::Right;
  return std::nullopt;
}

}  // namespace thea
