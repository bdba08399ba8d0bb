#pragma once

// Session state machine: onboarding (breathing, countdown), gameplay (pitch
// cues, actuation, interpretation window) and offboarding (reveal). The
// transition function is pure; it returns the effects the host must execute
// (sounds, device commands, UI updates, timers, log records).

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "thea/clock.hpp"
#include "thea/error.hpp"
#include "thea/game_config.hpp"
#include "thea/game_core.hpp"
#include "thea/gesture.hpp"
#include "thea/rng.hpp"
#include "thea/session_log.hpp"

namespace thea::control {

enum class SoundMode : std::uint8_t { TwoPitch, FirstPitchOnly, Off };

constexpr std::string_view to_string(SoundMode m) {
  switch (m) {
    case SoundMode::TwoPitch: return "two-pitch";
    case SoundMode::FirstPitchOnly: return "first-pitch";
    case SoundMode::Off: return "off";
  }
  return "?";
}

inline std::optional<SoundMode> parse_sound_mode(std::string_view s) {
  for (SoundMode m : {SoundMode::TwoPitch, SoundMode::FirstPitchOnly, SoundMode::Off})
    if (to_string(m) == s) return m;
  return std::nullopt;
}

struct TimingConfig {
  TimeMs countdown_tick_ms = 1000;
  TimeMs actuation_ms = 2000;
  TimeMs interpret_window_ms = 3000;
  TimeMs reveal_ms = 2000;
  TimeMs breathing_max_ms = 30000;
  TimeMs inter_round_gap_ms = 1000;
  TimeMs first_pitch_ms = 500;

  friend bool operator==(const TimingConfig&, const TimingConfig&) = default;
};

inline constexpr TimeMs kActuationCeilingMs = 2000;

inline void validate(const TimingConfig& t) {
  for (TimeMs v : {t.countdown_tick_ms, t.actuation_ms, t.interpret_window_ms, t.reveal_ms,
                   t.breathing_max_ms, t.inter_round_gap_ms, t.first_pitch_ms})
    if (v <= 0) throw Error(ErrorCode::InvalidTiming, "all timings must be positive");
  if (t.actuation_ms > kActuationCeilingMs)
    throw Error(ErrorCode::InvalidTiming, "actuation_ms exceeds the 2000 ms safety ceiling");
}

inline nlohmann::json to_json(const TimingConfig& t) {
  return {{"countdown_tick_ms", t.countdown_tick_ms},
          {"actuation_ms", t.actuation_ms},
          {"interpret_window_ms", t.interpret_window_ms},
          {"reveal_ms", t.reveal_ms},
          {"breathing_max_ms", t.breathing_max_ms},
          {"inter_round_gap_ms", t.inter_round_gap_ms},
          {"first_pitch_ms", t.first_pitch_ms}};
}

inline TimingConfig timing_from_json(const nlohmann::json& j) {
  TimingConfig t;
  try {
    t.countdown_tick_ms = j.value("countdown_tick_ms", t.countdown_tick_ms);
    t.actuation_ms = j.value("actuation_ms", t.actuation_ms);
    t.interpret_window_ms = j.value("interpret_window_ms", t.interpret_window_ms);
    t.reveal_ms = j.value("reveal_ms", t.reveal_ms);
    t.breathing_max_ms = j.value("breathing_max_ms", t.breathing_max_ms);
    t.inter_round_gap_ms = j.value("inter_round_gap_ms", t.inter_round_gap_ms);
    t.first_pitch_ms = j.value("first_pitch_ms", t.first_pitch_ms);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidTiming, e.what());
  }
  validate(t);
  return t;
}

// ---------------------------------------------------------------------------
// Phases

enum class PhaseKind : std::uint8_t {
  Idle,
  Breathing,
  Countdown,
  AwaitRound,
  FirstPitch,
  Actuating,
  InterpretWindow,
  Revealed,
  Paused,
  Completed,
  SafeOff,
};

constexpr std::string_view to_string(PhaseKind p) {
  switch (p) {
    case PhaseKind::Idle: return "Idle";
    case PhaseKind::Breathing: return "Breathing";
    case PhaseKind::Countdown: return "Countdown";
    case PhaseKind::AwaitRound: return "AwaitRound";
    case PhaseKind::FirstPitch: return "FirstPitch";
    case PhaseKind::Actuating: return "Actuating";
    case PhaseKind::InterpretWindow: return "InterpretWindow";
    case PhaseKind::Revealed: return "Revealed";
    case PhaseKind::Paused: return "Paused";
    case PhaseKind::Completed: return "Completed";
    case PhaseKind::SafeOff: return "SafeOff";
  }
  return "?";
}

struct SessionPhase {
  PhaseKind kind = PhaseKind::Idle;
  int tick = 0;                              // Countdown: 3, 2 or 1
  PhaseKind resume_to = PhaseKind::Idle;     // Paused only

  friend bool operator==(const SessionPhase&, const SessionPhase&) = default;
};

inline std::string describe(const SessionPhase& p) {
  if (p.kind == PhaseKind::Countdown) return "Countdown(" + std::to_string(p.tick) + ")";
  if (p.kind == PhaseKind::Paused)
    return "Paused(" + std::string(to_string(p.resume_to)) + ")";
  return std::string(to_string(p.kind));
}

// A play is under way: the phases a pause or stop applies to.
constexpr bool in_play(PhaseKind k) {
  switch (k) {
    case PhaseKind::Breathing:
    case PhaseKind::Countdown:
    case PhaseKind::AwaitRound:
    case PhaseKind::FirstPitch:
    case PhaseKind::Actuating:
    case PhaseKind::InterpretWindow:
    case PhaseKind::Revealed:
      return true;
    default:
      return false;
  }
}

// ---------------------------------------------------------------------------
// Events

enum class Voice : std::uint8_t { Stop, Pause, Resume };

constexpr std::string_view to_string(Voice v) {
  switch (v) {
    case Voice::Stop: return "stop";
    case Voice::Pause: return "pause";
    case Voice::Resume: return "resume";
  }
  return "?";
}

using DeadlineId = std::uint64_t;

namespace ev {
struct StartPressed {};
struct SkipBreathing {};
struct TimerElapsed {
  DeadlineId deadline = 0;
};
struct VoiceCommand {
  Voice command = Voice::Pause;
};
struct RevealPressed {};
struct ActuationAcked {
  HandSide hand = HandSide::Left;
  int round = 0;
  Completeness completeness = Completeness::Complete;
};
struct KillSwitch {
  HandSide hand = HandSide::Left;
};
struct UsageLimitReached {};
// Brings a session out of SafeOff once the hardware has been reset.
struct DeviceReset {};
}  // namespace ev

using SessionEvent =
    std::variant<ev::StartPressed, ev::SkipBreathing, ev::TimerElapsed, ev::VoiceCommand,
                 ev::RevealPressed, ev::ActuationAcked, ev::KillSwitch, ev::UsageLimitReached,
                 ev::DeviceReset>;

inline nlohmann::json to_json(const SessionEvent& e) {
  using nlohmann::json;
  struct V {
    json operator()(const ev::StartPressed&) const { return {{"event", "start"}}; }
    json operator()(const ev::SkipBreathing&) const { return {{"event", "skip"}}; }
    json operator()(const ev::TimerElapsed& t) const {
      return {{"event", "timer"}, {"deadline", t.deadline}};
    }
    json operator()(const ev::VoiceCommand& v) const {
      return {{"event", "voice"}, {"command", std::string(to_string(v.command))}};
    }
    json operator()(const ev::RevealPressed&) const { return {{"event", "reveal"}}; }
    json operator()(const ev::ActuationAcked& a) const {
      return {{"event", "ack"},
              {"hand", std::string(to_string(a.hand))},
              {"round", a.round},
              {"completeness", std::string(to_string(a.completeness))}};
    }
    json operator()(const ev::KillSwitch& k) const {
      return {{"event", "kill"}, {"hand", std::string(to_string(k.hand))}};
    }
    json operator()(const ev::UsageLimitReached&) const { return {{"event", "usage_limit"}}; }
    json operator()(const ev::DeviceReset&) const { return {{"event", "reset"}}; }
  };
  return std::visit(V{}, e);
}

// ---------------------------------------------------------------------------
// Round planning and results

struct PlannedHand {
  HandSide side = HandSide::Left;
  Gesture gesture = Gesture::OpenPalm;
  std::optional<int> channel;  // none for OpenPalm

  friend bool operator==(const PlannedHand&, const PlannedHand&) = default;
};

struct RoundPlan {
  std::vector<PlannedHand> hands;
  friend bool operator==(const RoundPlan&, const RoundPlan&) = default;
};

// Draws one gesture per hand that plays this round: both hands in Godai and
// Ídio, only the hand whose turn it is in Eptá.
inline RoundPlan plan_round(const GameState& game, const GameConfig& config, SessionRng& rng) {
  if (is_finished(game)) throw Error(ErrorCode::GameOver, "cannot plan a round of a finished game");
  RoundPlan plan;
  auto add = [&](HandSide side) {
    const Gesture g = draw_gesture(rng, game);
    plan.hands.push_back({side, g, config.channel_of(g)});
  };
  if (const auto* epta = std::get_if<EptaState>(&game)) {
    add(epta->turn);
  } else {
    add(HandSide::Left);
    add(HandSide::Right);
  }
  return plan;
}

// A preset round: one gesture per playing hand, in plan_round's order.
inline RoundPlan plan_from_deck(const GameState& game, const GameConfig& config,
                                const std::vector<Gesture>& gestures) {
  if (is_finished(game)) throw Error(ErrorCode::GameOver, "cannot plan a round of a finished game");
  std::vector<HandSide> sides{HandSide::Left, HandSide::Right};
  if (const auto* epta = std::get_if<EptaState>(&game)) sides = {epta->turn};
  if (gestures.size() != sides.size())
    throw Error(ErrorCode::WrongHandCount, "deck round has " + std::to_string(gestures.size()) +
                                               " gestures, expected " + std::to_string(sides.size()));
  RoundPlan plan;
  for (std::size_t i = 0; i < sides.size(); ++i) {
    if (const auto* idio = std::get_if<IdioState>(&game); idio && idio->is_struck(gestures[i]))
      throw Error(ErrorCode::StruckGestureShown, std::string(to_string(gestures[i])) + " is struck");
    plan.hands.push_back({sides[i], gestures[i], config.channel_of(gestures[i])});
  }
  return plan;
}

struct RoundResult {
  int round = 0;
  GameKind game = GameKind::Godai;
  std::vector<PlannedHand> shown;
  nlohmann::json outcome = nlohmann::json::object();

  friend bool operator==(const RoundResult&, const RoundResult&) = default;
};

inline nlohmann::json to_json(const RoundResult& r) {
  nlohmann::json shown = nlohmann::json::array();
  for (const auto& h : r.shown)
    shown.push_back({{"hand", std::string(to_string(h.side))},
                     {"gesture", std::string(to_string(h.gesture))}});
  return {{"round", r.round},
          {"game", std::string(to_string(r.game))},
          {"shown", shown},
          {"outcome", r.outcome}};
}

// Applies a played round to the game and describes what happened.
inline std::pair<GameState, RoundResult> resolve_round(const GameState& game,
                                                       const RoundPlan& plan,
                                                       const GameConfig& config, int round) {
  using nlohmann::json;
  RoundResult result{round, kind_of(game), plan.hands, json::object()};
  auto gesture_of = [&](HandSide side) {
    for (const auto& h : plan.hands)
      if (h.side == side) return h.gesture;
    throw Error(ErrorCode::WrongHandCount, "plan lacks a hand");
  };
  GameState next = game;
  if (const auto* g = std::get_if<GodaiState>(&game)) {
    const Gesture l = gesture_of(HandSide::Left);
    const Gesture r = gesture_of(HandSide::Right);
    auto s = godai_apply(*g, l, r, config);
    result.outcome = {{"result", std::string(to_string(s.history.back().outcome))},
                      {"elements",
                       {{"left", std::string(to_string(config.element_of(l)))},
                        {"right", std::string(to_string(config.element_of(r)))}}},
                      {"score", {{"left", s.score[0]}, {"right", s.score[1]}}},
                      {"finished", s.finished()}};
    if (auto w = s.match_winner()) {
      result.outcome["winner"] = std::string(to_string(*w));
      result.outcome["summary"] = std::string(to_string(*w)) + " wins " +
                                  std::to_string(s.score_of(*w)) + " to " +
                                  std::to_string(s.score_of(other(*w)));
    }
    next = std::move(s);
  } else if (const auto* e = std::get_if<EptaState>(&game)) {
    const HandSide hand = e->turn;
    const int number = config.number_of(gesture_of(hand));
    auto s = epta_apply(*e, number);
    result.outcome = {{"hand", std::string(to_string(hand))},
                      {"number", number},
                      {"sums", {{"left", s.sums[0]}, {"right", s.sums[1]}}},
                      {"finished", s.finished()}};
    if (s.outcome.kind == EptaOutcome::Kind::Won)
      result.outcome["won"] = std::string(to_string(s.outcome.hand));
    if (s.outcome.kind == EptaOutcome::Kind::Lost)
      result.outcome["lost"] = std::string(to_string(s.outcome.hand));
    next = std::move(s);
  } else {
    const auto& i = std::get<IdioState>(game);
    std::vector<Gesture> shown;
    for (const auto& h : plan.hands) shown.push_back(h.gesture);
    auto s = idio_apply(i, shown);
    const auto& last = s.history.back();
    result.outcome = {
        {"struck", last.struck ? json(std::string(to_string(*last.struck))) : json(nullptr)},
        {"struck_total", s.struck_count()},
        {"finished", s.finished()}};
    next = std::move(s);
  }
  return {std::move(next), std::move(result)};
}

// ---------------------------------------------------------------------------
// Effects

enum class TimerKind : std::uint8_t {
  Breathing,
  CountdownTick,
  RoundGap,
  FirstPitch,
  Actuation,
  Interpret,
  Hide,
};

constexpr std::string_view to_string(TimerKind t) {
  switch (t) {
    case TimerKind::Breathing: return "breathing";
    case TimerKind::CountdownTick: return "tick";
    case TimerKind::RoundGap: return "round";
    case TimerKind::FirstPitch: return "pitch";
    case TimerKind::Actuation: return "actuate";
    case TimerKind::Interpret: return "interpret";
    case TimerKind::Hide: return "hide";
  }
  return "?";
}

namespace fx {
struct PlayFirstPitch {
  friend bool operator==(const PlayFirstPitch&, const PlayFirstPitch&) = default;
};
struct PlaySecondPitch {
  HandSide hand = HandSide::Left;
  Gesture gesture = Gesture::OpenPalm;
  friend bool operator==(const PlaySecondPitch&, const PlaySecondPitch&) = default;
};
struct PlayCountdownSound {
  int tick = 3;
  friend bool operator==(const PlayCountdownSound&, const PlayCountdownSound&) = default;
};
struct SendActuate {
  HandSide hand = HandSide::Left;
  int channel = 1;
  TimeMs duration_ms = 0;
  friend bool operator==(const SendActuate&, const SendActuate&) = default;
};
struct SendStopAll {
  friend bool operator==(const SendStopAll&, const SendStopAll&) = default;
};
struct ShowBreathing {
  friend bool operator==(const ShowBreathing&, const ShowBreathing&) = default;
};
struct ShowCountdown {
  int tick = 3;
  friend bool operator==(const ShowCountdown&, const ShowCountdown&) = default;
};
struct HideResult {
  friend bool operator==(const HideResult&, const HideResult&) = default;
};
struct ShowResult {
  RoundResult result;
  TimeMs duration_ms = 0;
  friend bool operator==(const ShowResult&, const ShowResult&) = default;
};
struct ArmTimer {
  DeadlineId deadline = 0;
  TimerKind kind = TimerKind::Breathing;
  TimeMs ms = 0;
  friend bool operator==(const ArmTimer&, const ArmTimer&) = default;
};
struct AppendLog {
  LogEntry record;
  friend bool operator==(const AppendLog&, const AppendLog&) = default;
};
struct NotifyUsageLimit {
  friend bool operator==(const NotifyUsageLimit&, const NotifyUsageLimit&) = default;
};
}  // namespace fx

using Effect = std::variant<fx::PlayFirstPitch, fx::PlaySecondPitch, fx::PlayCountdownSound,
                            fx::SendActuate, fx::SendStopAll, fx::ShowBreathing,
                            fx::ShowCountdown, fx::HideResult, fx::ShowResult, fx::ArmTimer,
                            fx::AppendLog, fx::NotifyUsageLimit>;

// Effects that travel to the EMS devices.
inline bool is_device_bound(const Effect& e) {
  return std::holds_alternative<fx::SendActuate>(e) || std::holds_alternative<fx::SendStopAll>(e);
}

inline nlohmann::json to_json(const Effect& e) {
  using nlohmann::json;
  struct V {
    json operator()(const fx::PlayFirstPitch&) const { return {{"effect", "PlayFirstPitch"}}; }
    json operator()(const fx::PlaySecondPitch& p) const {
      return {{"effect", "PlaySecondPitch"},
              {"hand", std::string(to_string(p.hand))},
              {"gesture", std::string(to_string(p.gesture))}};
    }
    json operator()(const fx::PlayCountdownSound& c) const {
      return {{"effect", "PlayCountdownSound"}, {"tick", c.tick}};
    }
    json operator()(const fx::SendActuate& a) const {
      return {{"effect", "SendActuate"},
              {"hand", std::string(to_string(a.hand))},
              {"channel", a.channel},
              {"duration_ms", a.duration_ms}};
    }
    json operator()(const fx::SendStopAll&) const { return {{"effect", "SendStopAll"}}; }
    json operator()(const fx::ShowBreathing&) const { return {{"effect", "ShowBreathing"}}; }
    json operator()(const fx::ShowCountdown& c) const {
      return {{"effect", "ShowCountdown"}, {"tick", c.tick}};
    }
    json operator()(const fx::HideResult&) const { return {{"effect", "HideResult"}}; }
    json operator()(const fx::ShowResult& s) const {
      return {{"effect", "ShowResult"}, {"result", to_json(s.result)}, {"duration_ms", s.duration_ms}};
    }
    json operator()(const fx::ArmTimer& t) const {
      return {{"effect", "ArmTimer"},
              {"deadline", t.deadline},
              {"timer", std::string(to_string(t.kind))},
              {"ms", t.ms}};
    }
    json operator()(const fx::AppendLog& l) const {
      return {{"effect", "AppendLog"},
              {"kind", std::string(to_string(l.record.kind))},
              {"detail", l.record.detail}};
    }
    json operator()(const fx::NotifyUsageLimit&) const { return {{"effect", "NotifyUsageLimit"}}; }
  };
  return std::visit(V{}, e);
}

// ---------------------------------------------------------------------------
// Session context

struct HandStatus {
  bool pending = false;  // waiting for the device's completion report
  Completeness completeness = Completeness::Unknown;
  friend bool operator==(const HandStatus&, const HandStatus&) = default;
};

struct SessionContext {
  SessionPhase phase;
  TimingConfig timing;
  SoundMode sound = SoundMode::TwoPitch;
  GameConfig game_config = GameConfig::defaults();
  GameKind game_kind = GameKind::Godai;
  GodaiMode godai_mode = GodaiMode::FreePlay;
  GameState game = GodaiState{};
  SessionRng rng;

  DeadlineId next_deadline = 1;
  std::optional<DeadlineId> phase_deadline;  // the timer of the current phase
  TimerKind phase_timer = TimerKind::Breathing;
  std::optional<DeadlineId> hide_deadline;  // independent of phase

  int round = 0;  // rounds started over the session's lifetime
  std::optional<RoundPlan> plan;
  // Preset rounds dealt before any random draw; see plan_from_deck.
  std::vector<std::vector<Gesture>> deck;
  std::size_t dealt = 0;
  std::array<HandStatus, 2> hands{};
  std::optional<RoundResult> last_result;
  bool result_visible = false;

  TimeMs play_started_at = 0;
  bool usage_notified = false;

  static SessionContext make(GameKind kind, GodaiMode mode, SoundMode sound, TimingConfig timing,
                             GameConfig config, std::uint64_t seed,
                             std::vector<std::vector<Gesture>> deck = {}) {
    validate(timing);
    validate(config);
    SessionContext c;
    c.timing = timing;
    c.sound = sound;
    c.game_config = std::move(config);
    c.game_kind = kind;
    c.godai_mode = mode;
    c.game = new_game(kind, mode, c.game_config);
    c.rng = SessionRng::stream(seed, rng_stream::kGame);
    c.deck = std::move(deck);
    return c;
  }

  friend bool operator==(const SessionContext&, const SessionContext&) = default;
};

struct InvalidEvent {
  SessionPhase phase;
  nlohmann::json event;
};

struct Step {
  SessionContext context;
  std::vector<Effect> effects;
  std::optional<InvalidEvent> rejected;
};

namespace detail {

class Transition {
 public:
  Transition(const SessionContext& ctx, TimeMs now) : c_(ctx), now_(now) {}

  SessionContext& ctx() { return c_; }
  TimeMs now() const { return now_; }
  void emit(Effect e) { effects_.push_back(std::move(e)); }
  void log(RecordKind kind, nlohmann::json detail = nlohmann::json::object()) {
    emit(fx::AppendLog{LogEntry{kind, std::move(detail)}});
  }

  void arm_phase_timer(TimerKind kind, TimeMs ms) {
    const DeadlineId id = c_.next_deadline++;
    c_.phase_deadline = id;
    c_.phase_timer = kind;
    emit(fx::ArmTimer{id, kind, ms});
  }

  void enter(SessionPhase p) {
    c_.phase = p;
    c_.phase_deadline.reset();
  }

  void enter_breathing() {
    enter({PhaseKind::Breathing});
    emit(fx::ShowBreathing{});
    arm_phase_timer(TimerKind::Breathing, c_.timing.breathing_max_ms);
  }

  void enter_countdown(int tick) {
    enter({PhaseKind::Countdown, tick});
    emit(fx::ShowCountdown{tick});
    emit(fx::PlayCountdownSound{tick});
    arm_phase_timer(TimerKind::CountdownTick, c_.timing.countdown_tick_ms);
  }

  void enter_await_round() {
    enter({PhaseKind::AwaitRound});
    arm_phase_timer(TimerKind::RoundGap, c_.timing.inter_round_gap_ms);
  }

  void start_round() {
    c_.plan = c_.dealt < c_.deck.size() ? plan_from_deck(c_.game, c_.game_config, c_.deck[c_.dealt++])
                                        : plan_round(c_.game, c_.game_config, c_.rng);
    ++c_.round;
    c_.hands = {};
    if (c_.sound == SoundMode::Off) {
      enter_actuating();
    } else {
      enter({PhaseKind::FirstPitch});
      emit(fx::PlayFirstPitch{});
      arm_phase_timer(TimerKind::FirstPitch, c_.timing.first_pitch_ms);
    }
  }

  void enter_actuating() {
    enter({PhaseKind::Actuating});
    for (const auto& h : c_.plan->hands) {
      if (c_.sound == SoundMode::TwoPitch) emit(fx::PlaySecondPitch{h.side, h.gesture});
      auto& status = c_.hands[index_of(h.side)];
      if (h.channel) {
        status.pending = true;
        emit(fx::SendActuate{h.side, *h.channel, c_.timing.actuation_ms});
      } else {
        // OpenPalm is the relaxed hand: nothing is driven, it is always shown.
        status.completeness = Completeness::Complete;
        log_gesture(h, Completeness::Complete);
      }
    }
    arm_phase_timer(TimerKind::Actuation, c_.timing.actuation_ms);
  }

  void log_gesture(const PlannedHand& h, Completeness completeness) {
    log(RecordKind::GestureShown, {{"hand", std::string(to_string(h.side))},
                                   {"gesture", std::string(to_string(h.gesture))},
                                   {"completeness", std::string(to_string(completeness))},
                                   {"round", c_.round}});
  }

  void finish_actuation() {
    auto [next, result] = resolve_round(c_.game, *c_.plan, c_.game_config, c_.round);
    c_.game = std::move(next);
    c_.last_result = result;
    log(RecordKind::RoundResolved, to_json(result));
    enter({PhaseKind::InterpretWindow});
    arm_phase_timer(TimerKind::Interpret, c_.timing.interpret_window_ms);
  }

  // Records hands whose completion report never arrived.
  void close_acks() {
    if (!c_.plan) return;
    for (const auto& h : c_.plan->hands) {
      auto& status = c_.hands[index_of(h.side)];
      if (!status.pending) continue;
      status.pending = false;
      status.completeness = Completeness::Unknown;
      log_gesture(h, Completeness::Unknown);
    }
    c_.plan.reset();
  }

  void end_play(std::string_view reason) {
    log(RecordKind::SessionEnded, {{"duration_ms", now_ - c_.play_started_at},
                                   {"reason", std::string(reason)},
                                   {"game", std::string(to_string(c_.game_kind))},
                                   {"rounds", c_.round}});
  }

  // After the result window: next round, or the end of the game.
  void end_round() {
    close_acks();
    if (is_finished(c_.game)) {
      enter({PhaseKind::Completed});
      end_play("completed");
    } else {
      enter_await_round();
    }
  }

  void reject(const SessionEvent& e) { rejected_ = InvalidEvent{c_.phase, to_json(e)}; }

  Step finish() && { return {std::move(c_), std::move(effects_), std::move(rejected_)}; }

 private:
  SessionContext c_;
  TimeMs now_;
  std::vector<Effect> effects_;
  std::optional<InvalidEvent> rejected_;
};

}  // namespace detail

// Deterministic transition. Undefined (phase, event) pairs leave the context
// unchanged and are reported in Step::rejected; they never throw. Timer events
// for superseded deadlines and acknowledgements for past rounds are ignored.
inline Step advance(const SessionContext& ctx, const SessionEvent& event, TimeMs now) {
  detail::Transition t(ctx, now);
  auto& c = t.ctx();
  const PhaseKind phase = c.phase.kind;

  std::visit(
      [&](const auto& e) {
        using E = std::decay_t<decltype(e)>;

        if constexpr (std::is_same_v<E, ev::StartPressed>) {
          if (phase != PhaseKind::Idle && phase != PhaseKind::Completed) return t.reject(event);
          if (phase == PhaseKind::Completed) c.game = new_game(c.game_kind, c.godai_mode, c.game_config);
          c.play_started_at = now;
          c.last_result.reset();
          t.enter_breathing();

        } else if constexpr (std::is_same_v<E, ev::SkipBreathing>) {
          if (phase != PhaseKind::Breathing) return t.reject(event);
          t.enter_countdown(3);

        } else if constexpr (std::is_same_v<E, ev::TimerElapsed>) {
          if (c.hide_deadline == e.deadline) {
            c.hide_deadline.reset();
            c.result_visible = false;
            t.emit(fx::HideResult{});
            if (phase == PhaseKind::Revealed) t.end_round();
            return;
          }
          if (c.phase_deadline != e.deadline) return;  // stale
          c.phase_deadline.reset();
          switch (phase) {
            case PhaseKind::Breathing: t.enter_countdown(3); break;
            case PhaseKind::Countdown:
              if (c.phase.tick > 1)
                t.enter_countdown(c.phase.tick - 1);
              else
                t.enter_await_round();
              break;
            case PhaseKind::AwaitRound: t.start_round(); break;
            case PhaseKind::FirstPitch: t.enter_actuating(); break;
            case PhaseKind::Actuating: t.finish_actuation(); break;
            case PhaseKind::InterpretWindow: t.end_round(); break;
            default: break;
          }

        } else if constexpr (std::is_same_v<E, ev::VoiceCommand>) {
          switch (e.command) {
            case Voice::Pause:
              if (!in_play(phase)) return t.reject(event);
              t.emit(fx::SendStopAll{});
              t.log(RecordKind::Paused, {{"from", std::string(to_string(phase))}});
              t.enter({PhaseKind::Paused, 0, phase});
              break;
            case Voice::Resume: {
              if (phase != PhaseKind::Paused) return t.reject(event);
              t.log(RecordKind::Resumed, {{"to", std::string(to_string(c.phase.resume_to))}});
              const PhaseKind was = c.phase.resume_to;
              if (was == PhaseKind::Breathing) {
                t.enter_breathing();
              } else if (was == PhaseKind::InterpretWindow || was == PhaseKind::Revealed) {
                // The round already resolved; continue from its end.
                t.close_acks();
                if (is_finished(c.game)) {
                  t.enter({PhaseKind::Completed});
                  t.end_play("completed");
                } else {
                  t.enter_countdown(3);
                }
              } else {
                // An interrupted round is abandoned unresolved and replayed
                // after a fresh countdown.
                c.plan.reset();
                c.hands = {};
                t.enter_countdown(3);
              }
              break;
            }
            case Voice::Stop:
              if (!in_play(phase) && phase != PhaseKind::Paused) return t.reject(event);
              t.emit(fx::SendStopAll{});
              t.close_acks();
              t.enter({PhaseKind::SafeOff});
              t.end_play("stopped");
              break;
          }

        } else if constexpr (std::is_same_v<E, ev::RevealPressed>) {
          if (phase != PhaseKind::InterpretWindow || !c.last_result) return t.reject(event);
          t.enter({PhaseKind::Revealed});
          c.result_visible = true;
          const DeadlineId id = c.next_deadline++;
          c.hide_deadline = id;
          t.emit(fx::ShowResult{*c.last_result, c.timing.reveal_ms});
          t.emit(fx::ArmTimer{id, TimerKind::Hide, c.timing.reveal_ms});

        } else if constexpr (std::is_same_v<E, ev::ActuationAcked>) {
          if (!c.plan || e.round != c.round) return;  // late report for an old round
          auto& status = c.hands[index_of(e.hand)];
          if (!status.pending) return;
          status.pending = false;
          status.completeness = e.completeness;
          for (const auto& h : c.plan->hands)
            if (h.side == e.hand) t.log_gesture(h, e.completeness);

        } else if constexpr (std::is_same_v<E, ev::KillSwitch>) {
          t.emit(fx::SendStopAll{});
          t.log(RecordKind::KillSwitch, {{"hand", std::string(to_string(e.hand))}});
          const bool playing = in_play(phase) || phase == PhaseKind::Paused;
          t.close_acks();
          t.enter({PhaseKind::SafeOff});
          if (playing) t.end_play("kill_switch");

        } else if constexpr (std::is_same_v<E, ev::UsageLimitReached>) {
          if (c.usage_notified) return;
          c.usage_notified = true;
          t.emit(fx::NotifyUsageLimit{});
          t.log(RecordKind::UsageLimit, {{"limit_ms", 30 * 60 * 1000}});

        } else if constexpr (std::is_same_v<E, ev::DeviceReset>) {
          if (phase != PhaseKind::SafeOff) return t.reject(event);
          c.game = new_game(c.game_kind, c.godai_mode, c.game_config);
          c.last_result.reset();
          t.enter({PhaseKind::Idle});
        }
      },
      event);

  // A rejected event must leave no trace.
  auto step = std::move(t).finish();
  if (step.rejected) return Step{ctx, {}, std::move(step.rejected)};
  return step;
}

}  // namespace thea::control
