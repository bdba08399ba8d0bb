#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "thea/error.hpp"
#include "thea/game_config.hpp"
#include "thea/gesture.hpp"
#include "thea/rng.hpp"

namespace thea {

enum class RoundOutcome : std::uint8_t { LeftWins, RightWins, Tie };

constexpr std::string_view to_string(RoundOutcome o) {
  switch (o) {
    case RoundOutcome::LeftWins: return "LeftWins";
    case RoundOutcome::RightWins: return "RightWins";
    case RoundOutcome::Tie: return "Tie";
  }
  return "?";
}

inline RoundOutcome godai_resolve(Element left, Element right, const DominanceMatrix& m) {
  if (left == right) return RoundOutcome::Tie;
  return m(left, right) ? RoundOutcome::LeftWins : RoundOutcome::RightWins;
}

// ---------------------------------------------------------------------------
// Godai

enum class GodaiMode : std::uint8_t { BestOf3, BestOf5, FreePlay };

constexpr std::string_view to_string(GodaiMode m) {
  switch (m) {
    case GodaiMode::BestOf3: return "bo3";
    case GodaiMode::BestOf5: return "bo5";
    case GodaiMode::FreePlay: return "free";
  }
  return "?";
}

inline std::optional<GodaiMode> parse_godai_mode(std::string_view s) {
  for (GodaiMode m : {GodaiMode::BestOf3, GodaiMode::BestOf5, GodaiMode::FreePlay})
    if (to_string(m) == s) return m;
  return std::nullopt;
}

// Points needed to take the match; nullopt for free play.
constexpr std::optional<int> winning_score(GodaiMode m) {
  switch (m) {
    case GodaiMode::BestOf3: return 2;
    case GodaiMode::BestOf5: return 3;
    case GodaiMode::FreePlay: return std::nullopt;
  }
  return std::nullopt;
}

struct GodaiRound {
  int round = 0;
  Gesture left = Gesture::OpenPalm;
  Gesture right = Gesture::OpenPalm;
  RoundOutcome outcome = RoundOutcome::Tie;

  friend bool operator==(const GodaiRound&, const GodaiRound&) = default;
};

struct GodaiState {
  GodaiMode mode = GodaiMode::BestOf3;
  std::array<int, 2> score{0, 0};  // indexed by HandSide
  std::vector<GodaiRound> history;

  int score_of(HandSide s) const { return score[index_of(s)]; }

  bool finished() const {
    auto target = winning_score(mode);
    return target && std::max(score[0], score[1]) >= *target;
  }

  std::optional<HandSide> match_winner() const {
    if (!finished()) return std::nullopt;
    return score[0] > score[1] ? HandSide::Left : HandSide::Right;
  }

  friend bool operator==(const GodaiState&, const GodaiState&) = default;
};

// Ties award nothing; the next round is simply played again.
inline GodaiState godai_apply(const GodaiState& s, Gesture left, Gesture right,
                              const GameConfig& config) {
  if (s.finished()) throw Error(ErrorCode::AlreadyFinished, "Godai match is over");
  GodaiState next = s;
  const auto outcome =
      godai_resolve(config.element_of(left), config.element_of(right), config.dominance);
  if (outcome == RoundOutcome::LeftWins) ++next.score[index_of(HandSide::Left)];
  if (outcome == RoundOutcome::RightWins) ++next.score[index_of(HandSide::Right)];
  next.history.push_back({static_cast<int>(s.history.size()) + 1, left, right, outcome});
  return next;
}

// ---------------------------------------------------------------------------
// Eptá

struct EptaOutcome {
  enum class Kind : std::uint8_t { Ongoing, Won, Lost };
  Kind kind = Kind::Ongoing;
  HandSide hand = HandSide::Left;  // meaningful only when terminal

  bool terminal() const { return kind != Kind::Ongoing; }
  friend bool operator==(const EptaOutcome&, const EptaOutcome&) = default;
};

struct EptaReveal {
  HandSide hand = HandSide::Right;
  int number = 0;

  friend bool operator==(const EptaReveal&, const EptaReveal&) = default;
};

inline constexpr int kEptaTarget = 7;

struct EptaState {
  std::array<int, 2> sums{0, 0};
  HandSide turn = HandSide::Right;
  std::vector<EptaReveal> history;
  EptaOutcome outcome;

  int sum_of(HandSide s) const { return sums[index_of(s)]; }
  bool finished() const { return outcome.terminal(); }

  friend bool operator==(const EptaState&, const EptaState&) = default;
};

inline EptaState epta_apply(const EptaState& s, int number) {
  if (s.finished()) throw Error(ErrorCode::GameOver, "Eptá game is over");
  if (number < 0) throw Error(ErrorCode::IllegalNumber, "negative Eptá number");
  EptaState next = s;
  const HandSide hand = s.turn;
  int& sum = next.sums[index_of(hand)];
  sum += number;
  next.history.push_back({hand, number});
  if (sum == kEptaTarget) {
    next.outcome = {EptaOutcome::Kind::Won, hand};
  } else if (sum > kEptaTarget) {
    next.outcome = {EptaOutcome::Kind::Lost, hand};
  } else {
    next.turn = other(hand);
  }
  return next;
}

// ---------------------------------------------------------------------------
// Ídio

struct IdioRound {
  int round = 0;
  std::vector<Gesture> shown;
  std::optional<Gesture> struck;

  friend bool operator==(const IdioRound&, const IdioRound&) = default;
};

struct IdioState {
  std::array<bool, kGestureCount> struck{};
  int round = 0;
  int strike_threshold = 2;
  std::size_t hands = 2;
  std::vector<IdioRound> history;

  bool is_struck(Gesture g) const { return struck[index_of(g)]; }

  std::size_t struck_count() const {
    return static_cast<std::size_t>(std::count(struck.begin(), struck.end(), true));
  }

  std::vector<Gesture> remaining() const {
    std::vector<Gesture> out;
    for (Gesture g : kAllGestures)
      if (!is_struck(g)) out.push_back(g);
    return out;
  }

  bool finished() const { return struck_count() == kGestureCount; }

  friend bool operator==(const IdioState&, const IdioState&) = default;
};

inline IdioState idio_apply(const IdioState& s, const std::vector<Gesture>& shown) {
  if (shown.size() != s.hands)
    throw Error(ErrorCode::WrongHandCount, "Ídio round needs one gesture per active hand");
  for (Gesture g : shown)
    if (s.is_struck(g))
      throw Error(ErrorCode::StruckGestureShown,
                  std::string(to_string(g)) + " is already struck");
  IdioState next = s;
  ++next.round;
  IdioRound record{next.round, shown, std::nullopt};
  for (Gesture g : kAllGestures) {
    const auto n = std::count(shown.begin(), shown.end(), g);
    if (n >= s.strike_threshold) {
      next.struck[index_of(g)] = true;
      record.struck = g;
    }
  }
  next.history.push_back(std::move(record));
  return next;
}

// ---------------------------------------------------------------------------

using GameState = std::variant<GodaiState, EptaState, IdioState>;

inline GameKind kind_of(const GameState& s) {
  return static_cast<GameKind>(s.index());
}

inline bool is_finished(const GameState& s) {
  return std::visit([](const auto& g) { return g.finished(); }, s);
}

inline GameState new_game(GameKind kind, GodaiMode mode, const GameConfig& config,
                          std::size_t hands = 2) {
  switch (kind) {
    case GameKind::Godai: return GodaiState{mode, {0, 0}, {}};
    case GameKind::Epta: return EptaState{};
    case GameKind::Idio: {
      IdioState s;
      s.hands = hands;
      s.strike_threshold = config.strike_threshold_for(hands);
      return s;
    }
  }
  return GodaiState{};
}

// Memoryless draw: uniform over all five gestures, or over the gestures not
// yet struck in Ídio. Consumes the RNG only through uniform_below.
inline Gesture draw_gesture(SessionRng& rng, const GameState& s) {
  if (const auto* idio = std::get_if<IdioState>(&s)) {
    const auto candidates = idio->remaining();
    if (candidates.empty())
      throw Error(ErrorCode::NoGesturesRemaining, "all gestures are struck");
    return candidates[rng.uniform_below(candidates.size())];
  }
  return kAllGestures[rng.uniform_below(kGestureCount)];
}

// ---------------------------------------------------------------------------
// JSON views (logs, API snapshots)

inline nlohmann::json to_json(const GameState& s) {
  using nlohmann::json;
  struct Visitor {
    json operator()(const GodaiState& g) const {
      json j{{"game", "godai"},
             {"mode", std::string(to_string(g.mode))},
             {"score", {{"left", g.score[0]}, {"right", g.score[1]}}},
             {"rounds", g.history.size()},
             {"finished", g.finished()}};
      if (auto w = g.match_winner()) j["winner"] = std::string(to_string(*w));
      return j;
    }
    json operator()(const EptaState& e) const {
      json j{{"game", "epta"},
             {"sums", {{"left", e.sums[0]}, {"right", e.sums[1]}}},
             {"turn", std::string(to_string(e.turn))},
             {"reveals", e.history.size()},
             {"finished", e.finished()}};
      if (e.outcome.terminal()) {
        j["outcome"] = e.outcome.kind == EptaOutcome::Kind::Won ? "won" : "lost";
        j["hand"] = std::string(to_string(e.outcome.hand));
      } else {
        j["outcome"] = "ongoing";
      }
      return j;
    }
    json operator()(const IdioState& i) const {
      json struck = json::array();
      for (Gesture g : kAllGestures)
        if (i.is_struck(g)) struck.push_back(std::string(to_string(g)));
      return json{{"game", "idio"},
                  {"struck", struck},
                  {"round", i.round},
                  {"strike_threshold", i.strike_threshold},
                  {"finished", i.finished()}};
    }
  };
  return std::visit(Visitor{}, s);
}

}  // namespace thea
