#pragma once

// Session host: runs one control loop against two simulated devices over
// simulated links. Everything that happens (timers, spectator input, frames
// arriving, devices finishing an actuation) goes through one agenda ordered
// by (time, insertion order), so a session is a pure function of its config,
// seed and input script.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "thea/clock.hpp"
#include "thea/control_loop.hpp"
#include "thea/device_sim.hpp"
#include "thea/error.hpp"
#include "thea/rng.hpp"
#include "thea/session_config.hpp"
#include "thea/session_log.hpp"
#include "thea/transport.hpp"
#include "thea/wire_protocol.hpp"

namespace thea::sim {

enum class ClockMode : std::uint8_t { Virtual, Wall };

constexpr std::string_view to_string(ClockMode m) { return m == ClockMode::Virtual ? "virtual" : "wall"; }

// ---------------------------------------------------------------------------
// Inputs from outside the control loop: the companion UI, voice commands and
// the physical switches on the devices.

namespace input {
struct Control {
  control::SessionEvent event;
};
struct ToggleKill {
  HandSide side = HandSide::Left;
  bool engage = true;
};
struct Calibrate {
  HandSide side = HandSide::Left;
  int channel = 1;
  double fidelity = 1.0;
};
}  // namespace input

using Input = std::variant<input::Control, input::ToggleKill, input::Calibrate>;

struct ScriptLine {
  TimeMs t_ms = 0;
  std::string verb;
  std::vector<std::string> args;
};

inline std::string format_script_line(const ScriptLine& l) {
  std::string s = std::to_string(l.t_ms) + " " + l.verb;
  for (const auto& a : l.args) s += " " + a;
  return s;
}

namespace detail {
inline HandSide side_arg(const ScriptLine& l) {
  if (l.args.size() < 1) throw Error(ErrorCode::ScriptParse, l.verb + " needs a side");
  auto s = parse_hand_side(l.args[0]);
  if (!s) throw Error(ErrorCode::ScriptParse, "unknown side '" + l.args[0] + "'");
  return *s;
}
}  // namespace detail

// Verbs: start, skip, reveal, pause, resume, stop, reset, kill <side>,
// release <side>, calibrate <side> <channel> <fidelity>.
inline Input to_input(const ScriptLine& l) {
  using namespace control;
  const auto& v = l.verb;
  if (v == "start") return input::Control{ev::StartPressed{}};
  if (v == "skip") return input::Control{ev::SkipBreathing{}};
  if (v == "reveal") return input::Control{ev::RevealPressed{}};
  if (v == "pause") return input::Control{ev::VoiceCommand{Voice::Pause}};
  if (v == "resume") return input::Control{ev::VoiceCommand{Voice::Resume}};
  if (v == "stop") return input::Control{ev::VoiceCommand{Voice::Stop}};
  if (v == "reset") return input::Control{ev::DeviceReset{}};
  if (v == "kill") return input::ToggleKill{detail::side_arg(l), true};
  if (v == "release") return input::ToggleKill{detail::side_arg(l), false};
  if (v == "calibrate") {
    if (l.args.size() != 3) throw Error(ErrorCode::ScriptParse, "calibrate <side> <channel> <fidelity>");
    try {
      return input::Calibrate{detail::side_arg(l), std::stoi(l.args[1]), std::stod(l.args[2])};
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::ScriptParse, "bad calibrate arguments");
    }
  }
  throw Error(ErrorCode::ScriptParse, "unknown script verb '" + v + "'");
}

inline ScriptLine parse_script_line(const std::string& text) {
  std::istringstream in(text);
  ScriptLine l;
  if (!(in >> l.t_ms >> l.verb)) throw Error(ErrorCode::ScriptParse, "bad script line: " + text);
  if (l.t_ms < 0) throw Error(ErrorCode::ScriptParse, "negative time: " + text);
  for (std::string a; in >> a;) l.args.push_back(a);
  (void)to_input(l);
  return l;
}

// One event per line; blank lines and '#' comments are skipped. Lines need
// not be sorted; equal times keep file order.
inline std::vector<ScriptLine> parse_script(std::istream& in) {
  std::vector<ScriptLine> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_script_line(line));
    } catch (const Error& e) {
      throw Error(ErrorCode::ScriptParse, "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<ScriptLine> parse_script(const std::string& text) {
  std::istringstream in(text);
  return parse_script(in);
}

// ---------------------------------------------------------------------------

struct DeviceSlot {
  device::DeviceState state;
  wire::TransportParams link;
};

// Devices in hand order: the first drives the left hand, the second the right.
inline std::array<DeviceSlot, 2> slots_from_configs(const std::vector<device::DeviceConfig>& cfg,
                                                    const GameConfig& game) {
  if (cfg.size() != 2) throw Error(ErrorCode::InvalidConfig, "a session needs exactly two devices");
  return {DeviceSlot{cfg[0].initial_state(game), cfg[0].transport},
          DeviceSlot{cfg[1].initial_state(game), cfg[1].transport}};
}

struct HostOptions {
  std::string session_id = "session";
  SessionConfig config;
  std::array<DeviceSlot, 2> devices;
  ClockMode clock = ClockMode::Virtual;
  TimeMs start_ms = 0;  // clock reading when the session is created
  bool keep_transcript = true;
};

// One stimulation as the device itself saw it.
struct Activation {
  HandSide side = HandSide::Left;
  int channel = 0;
  TimeMs start = 0;
  std::optional<TimeMs> end;
  bool completed = false;  // ran its full duration
};

struct KillToggle {
  HandSide side;
  TimeMs at;
  bool engaged;
};

class SessionHost {
 public:
  using RecordSink = std::function<void(const SessionLogRecord&)>;

  explicit SessionHost(HostOptions opts, RecordSink sink = {})
      : opts_(std::move(opts)), sink_(std::move(sink)), now_(opts_.start_ms) {
    validate(opts_.config);
    const auto& cfg = opts_.config;
    ctx_ = control::SessionContext::make(cfg.game, cfg.mode, cfg.sound, cfg.timing,
                                         cfg.game_config, cfg.seed, cfg.deck);
    for (std::size_t i = 0; i < 2; ++i) {
      auto& d = opts_.devices[i];
      d.state = device::begin_session(d.state);
      wire::validate(d.link);
      device_rng_[i] = SessionRng::stream(cfg.seed, rng_stream::kDeviceBase + i);
      down_rng_[i] = SessionRng::stream(cfg.seed, rng_stream::kTransportBase + 2 * i);
      up_rng_[i] = SessionRng::stream(cfg.seed, rng_stream::kTransportBase + 2 * i + 1);
      kill_view_[i] = d.state.kill_switch_on;
    }
    nlohmann::json devices = nlohmann::json::array();
    for (const auto& d : opts_.devices) devices.push_back(to_json(device::config_of(d.state, d.link)));
    header_ = {{"type", "header"},
               {"format", 1},
               {"session_id", opts_.session_id},
               {"clock", std::string(to_string(opts_.clock))},
               {"seed", cfg.seed},
               {"rng", SessionRng::kAlgorithm},
               {"config", to_json(cfg)},
               {"devices", devices}};
    nlohmann::json detail = to_json(cfg);
    detail.erase("game_config");
    detail.erase("timing");
    detail.erase("deck");
    detail["devices"] = {opts_.devices[0].state.id, opts_.devices[1].state.id};
    detail["clock"] = std::string(to_string(opts_.clock));
    append(RecordKind::SessionStarted, std::move(detail));
  }

  // First line of the session's log file: everything needed to rerun it.
  const nlohmann::json& header() const { return header_; }

  void post(TimeMs at, Input in) {
    push(std::max(at, now_), std::move(in));
  }

  std::optional<TimeMs> next_time() const {
    if (agenda_.empty()) return std::nullopt;
    return agenda_.top().at;
  }

  bool step() {
    if (agenda_.empty()) return false;
    Item item = agenda_.top();
    agenda_.pop();
    if (!std::holds_alternative<Timer>(item.what)) --activity_pending_;
    now_ = std::max(now_, item.at);
    std::visit([&](auto& w) { process(w); }, item.what);
    return true;
  }

  // Processes everything due up to t, then moves the clock to t.
  void run_until(TimeMs t) {
    while (!agenda_.empty() && agenda_.top().at <= t) step();
    now_ = std::max(now_, t);
  }

  // Applies an input immediately; returns the rejection, if any.
  std::optional<control::InvalidEvent> apply(const Input& in) {
    last_rejection_.reset();
    std::visit([&](const auto& i) { handle_input(i); }, in);
    return last_rejection_;
  }

  // Receives each record as it is appended.
  void set_sink(RecordSink sink) { sink_ = std::move(sink); }

  TimeMs now() const { return now_; }
  const std::string& id() const { return opts_.session_id; }
  const SessionConfig& config() const { return opts_.config; }
  const control::SessionContext& context() const { return ctx_; }
  const control::SessionPhase& phase() const { return ctx_.phase; }
  const device::DeviceState& device(HandSide side) const { return opts_.devices[index_of(side)].state; }
  const DeviceSlot& slot(HandSide side) const { return opts_.devices[index_of(side)]; }
  const std::vector<SessionLogRecord>& records() const { return records_; }
  const std::vector<std::string>& transcript() const { return transcript_; }
  const std::vector<wire::CaptureLine>& capture() const { return capture_; }
  const std::vector<Activation>& activations() const { return activations_; }
  const std::vector<KillToggle>& kill_toggles() const { return kill_toggles_; }
  bool pending_inputs() const { return inputs_pending_ > 0; }
  // Frames in flight, devices mid-actuation or inputs not yet applied.
  bool busy() const { return activity_pending_ > 0; }

  nlohmann::json snapshot() const {
    nlohmann::json j = {{"session_id", opts_.session_id},
                        {"t_ms", now_},
                        {"phase", control::describe(ctx_.phase)},
                        {"phase_kind", std::string(control::to_string(ctx_.phase.kind))},
                        {"round", ctx_.round},
                        {"game", to_json(ctx_.game)},
                        {"result_visible", ctx_.result_visible},
                        {"usage_notified", ctx_.usage_notified},
                        {"config", to_json(opts_.config)},
                        {"records", records_.size()}};
    if (ctx_.phase.kind == control::PhaseKind::Countdown) j["tick"] = ctx_.phase.tick;
    if (ctx_.result_visible && ctx_.last_result) j["result"] = control::to_json(*ctx_.last_result);
    j["devices"] = nlohmann::json::array();
    for (const auto& d : opts_.devices) j["devices"].push_back(device::to_json(d.state));
    return j;
  }

 private:
  enum class Direction : std::uint8_t { Down, Up };

  struct Timer {
    control::DeadlineId id;
  };
  struct Scheduled {
    Input input;
  };
  struct Arrival {
    std::size_t device;
    Direction direction;
    wire::Bytes bytes;
  };
  struct Wake {
    std::size_t device;
  };

  struct Item {
    TimeMs at;
    std::uint64_t seq;
    std::variant<Timer, Scheduled, Arrival, Wake> what;
  };
  struct Later {
    bool operator()(const Item& a, const Item& b) const {
      return a.at != b.at ? a.at > b.at : a.seq > b.seq;
    }
  };

  void push(TimeMs at, Input in) {
    ++inputs_pending_;
    push(at, Scheduled{std::move(in)});
  }
  template <class T>
  void push(TimeMs at, T what) {
    if constexpr (!std::is_same_v<T, Timer>) ++activity_pending_;
    agenda_.push({at, seq_++, std::move(what)});
  }

  // --- transcript and log

  void trace(nlohmann::json j) {
    if (!opts_.keep_transcript) return;
    j["t"] = now_;
    transcript_.push_back(j.dump());
  }

  void append(RecordKind kind, nlohmann::json detail) {
    SessionLogRecord r{records_.size() + 1, now_, opts_.session_id, kind, std::move(detail)};
    trace({{"source", "log"}, {"kind", std::string(to_string(kind))}, {"seq", r.seq}});
    records_.push_back(r);
    if (sink_) sink_(records_.back());
  }

  // --- agenda items

  void process(Timer& t) { dispatch(control::ev::TimerElapsed{t.id}); }

  void process(Scheduled& s) {
    --inputs_pending_;
    std::visit([&](const auto& i) { handle_input(i); }, s.input);
  }

  void process(Arrival& a) {
    if (a.direction == Direction::Down)
      deliver_down(a.device, a.bytes);
    else
      deliver_up(a.device, a.bytes);
  }

  void process(Wake& w) {
    auto& slot = opts_.devices[w.device];
    auto r = device::tick(slot.state, now_);
    slot.state = r.state;
    if (r.report) {
      auto& act = activations_[*open_[w.device]];
      act.end = r.report->at;
      act.completed = true;
      open_[w.device].reset();
      trace({{"source", "device"},
             {"device", slot.state.id},
             {"done", r.report->channel},
             {"completeness", std::string(to_string(r.report->completeness))},
             {"active_ms", r.report->active_ms}});
    }
    after_device_step(w.device, r);
  }

  // --- inputs

  void handle_input(const input::Control& c) { dispatch(c.event); }

  void handle_input(const input::ToggleKill& k) {
    const std::size_t i = index_of(k.side);
    auto& slot = opts_.devices[i];
    trace({{"source", "input"}, {"input", k.engage ? "kill" : "release"}, {"device", slot.state.id}});
    if (slot.state.kill_switch_on == k.engage) return;
    auto r = device::toggle_kill_switch(slot.state, now_);
    slot.state = r.state;
    kill_toggles_.push_back({k.side, now_, k.engage});
    close_activation(i);
    after_device_step(i, r);
  }

  void handle_input(const input::Calibrate& c) {
    trace({{"source", "input"},
           {"input", "calibrate"},
           {"device", opts_.devices[index_of(c.side)].state.id},
           {"channel", c.channel},
           {"fidelity", c.fidelity}});
    if (!(c.fidelity >= 0.0 && c.fidelity <= 1.0))
      throw Error(ErrorCode::InvalidFidelity, "fidelity must lie in [0,1]");
    const auto bp = static_cast<std::uint16_t>(std::lround(c.fidelity * wire::kFidelityScale));
    send_down(index_of(c.side), wire::Frame{wire::CalibrateSet{static_cast<std::uint8_t>(c.channel), bp}});
  }

  // --- controller

  void dispatch(const control::SessionEvent& e) {
    trace({{"source", "event"}, {"event", control::to_json(e)}});
    if (std::holds_alternative<control::ev::DeviceReset>(e) && (kill_view_[0] || kill_view_[1])) {
      last_rejection_ = control::InvalidEvent{ctx_.phase, control::to_json(e)};
      trace({{"source", "rejected"}, {"reason", "kill switch still engaged"}});
      return;
    }
    auto step = control::advance(ctx_, e, now_);
    if (step.rejected) {
      last_rejection_ = step.rejected;
      trace({{"source", "rejected"}, {"phase", control::describe(step.rejected->phase)}});
      return;
    }
    const auto before = ctx_.phase;
    ctx_ = std::move(step.context);
    if (!(before == ctx_.phase)) {
      trace({{"source", "phase"}, {"phase", control::describe(ctx_.phase)}});
      append(RecordKind::PhaseChanged,
             {{"from", control::describe(before)}, {"to", control::describe(ctx_.phase)}});
    }
    for (const auto& f : step.effects) execute(f);
  }

  void execute(const control::Effect& f) {
    namespace fx = control::fx;
    trace({{"source", "effect"}, {"effect", control::to_json(f)}});
    if (const auto* a = std::get_if<fx::SendActuate>(&f)) {
      const std::size_t i = index_of(a->hand);
      pending_round_[i] = ctx_.round;
      send_down(i, wire::Frame{wire::Actuate{static_cast<std::uint8_t>(a->channel),
                                             static_cast<std::uint16_t>(a->duration_ms)}});
    } else if (std::holds_alternative<fx::SendStopAll>(f)) {
      for (std::size_t i = 0; i < 2; ++i) send_down(i, wire::Frame{wire::StopAll{}});
    } else if (const auto* t = std::get_if<fx::ArmTimer>(&f)) {
      push(now_ + t->ms, Timer{t->deadline});
    } else if (const auto* l = std::get_if<fx::AppendLog>(&f)) {
      append(l->record.kind, l->record.detail);
    } else if (const auto* s = std::get_if<fx::ShowResult>(&f)) {
      append(RecordKind::RevealUsed, {{"round", s->result.round}, {"duration_ms", s->duration_ms}});
    }
    // Sounds and screens are the companion UI's business; they live in the
    // transcript only.
  }

  // --- links and devices

  void send_down(std::size_t i, const wire::Frame& f) { send(i, Direction::Down, f); }

  void send(std::size_t i, Direction dir, const wire::Frame& f) {
    auto& slot = opts_.devices[i];
    auto& rng = dir == Direction::Down ? down_rng_[i] : up_rng_[i];
    const auto bytes = wire::encode(f);
    capture_.push_back({now_, dir == Direction::Down ? "down" : "up", slot.state.id, bytes});
    auto d = wire::transport_send(slot.link, f, now_, rng);
    if (!d) {
      trace({{"source", "link"}, {"dropped", wire::to_hex(bytes)}, {"device", slot.state.id}});
      return;
    }
    push(d->at, Arrival{i, dir, d->bytes});
    if (d->duplicate_at) push(*d->duplicate_at, Arrival{i, dir, d->bytes});
  }

  void deliver_down(std::size_t i, const wire::Bytes& bytes) {
    auto& slot = opts_.devices[i];
    const auto decoded = down_decoder_[i].feed(bytes);
    for (const auto& frame : decoded.frames) {
      const bool was_active = slot.state.active_channel().has_value();
      device::StepResult r;
      try {
        r = device::handle_frame(slot.state, frame, now_, device_rng_[i]);
      } catch (const Error& e) {
        trace({{"source", "device"}, {"device", slot.state.id}, {"error", e.what()}});
        continue;
      }
      slot.state = r.state;
      if (was_active && !slot.state.active_channel()) close_activation(i);
      if (r.report) {
        open_[i] = activations_.size();
        activations_.push_back({static_cast<HandSide>(i), r.report->channel, now_, std::nullopt, false});
        trace({{"source", "device"},
               {"device", slot.state.id},
               {"activate", r.report->channel},
               {"until", r.report->at}});
        push(r.report->at, Wake{i});
      }
      after_device_step(i, r);
    }
  }

  void after_device_step(std::size_t i, const device::StepResult& r) {
    for (const auto& f : r.responses) send(i, Direction::Up, f);
    // The host watches each unit's usage counter and raises the warning.
    if (r.usage_limit_reached) dispatch(control::ev::UsageLimitReached{});
  }

  void close_activation(std::size_t i) {
    if (!open_[i]) return;
    activations_[*open_[i]].end = now_;
    open_[i].reset();
  }

  void deliver_up(std::size_t i, const wire::Bytes& bytes) {
    const auto decoded = up_decoder_[i].feed(bytes);
    const auto hand = static_cast<HandSide>(i);
    for (const auto& frame : decoded.frames) {
      if (const auto* k = std::get_if<wire::EventKill>(&frame.payload)) {
        // Only the transition matters: a killed unit answers every frame
        // with EVENT_KILL.
        if (k->engaged && !kill_view_[i]) {
          kill_view_[i] = true;
          dispatch(control::ev::KillSwitch{hand});
        } else if (!k->engaged) {
          kill_view_[i] = false;
        }
      } else if (const auto* d = std::get_if<wire::ActuationDone>(&frame.payload)) {
        dispatch(control::ev::ActuationAcked{hand, pending_round_[i],
                                             static_cast<Completeness>(d->completeness)});
      } else {
        trace({{"source", "link"}, {"up", wire::to_hex(wire::encode(frame))}});
      }
    }
  }

  HostOptions opts_;
  RecordSink sink_;
  TimeMs now_;
  control::SessionContext ctx_;
  nlohmann::json header_;

  std::priority_queue<Item, std::vector<Item>, Later> agenda_;
  std::uint64_t seq_ = 0;
  std::size_t inputs_pending_ = 0;
  std::size_t activity_pending_ = 0;

  std::array<SessionRng, 2> device_rng_;
  std::array<SessionRng, 2> down_rng_;
  std::array<SessionRng, 2> up_rng_;
  std::array<wire::StreamDecoder, 2> down_decoder_;
  std::array<wire::StreamDecoder, 2> up_decoder_;
  std::array<int, 2> pending_round_{};
  std::array<bool, 2> kill_view_{};
  std::array<std::optional<std::size_t>, 2> open_;

  std::vector<SessionLogRecord> records_;
  std::vector<std::string> transcript_;
  std::vector<wire::CaptureLine> capture_;
  std::vector<Activation> activations_;
  std::vector<KillToggle> kill_toggles_;
  std::optional<control::InvalidEvent> last_rejection_;
};

// ---------------------------------------------------------------------------
// Headless runs

struct RunOptions {
  std::vector<ScriptLine> script;
  TimeMs horizon_ms = 3'600'000;  // free play runs until here, then stops
};

struct RunResult {
  TimeMs end_ms = 0;
  bool hit_horizon = false;
};

inline bool script_starts(const std::vector<ScriptLine>& script) {
  for (const auto& l : script)
    if (l.verb == "start") return true;
  return false;
}

// Drives a session on the virtual clock until nothing is left to happen.
// Without a scripted "start" the session is started at t=0. A session still
// in play at the horizon is stopped there.
inline RunResult run_to_completion(SessionHost& host, const RunOptions& opts) {
  if (!script_starts(opts.script)) host.post(0, input::Control{control::ev::StartPressed{}});
  for (const auto& l : opts.script) host.post(l.t_ms, to_input(l));

  RunResult result;
  while (auto t = host.next_time()) {
    if (*t > opts.horizon_ms) {
      result.hit_horizon = true;
      break;
    }
    host.step();
  }
  const auto phase = host.phase().kind;
  if (result.hit_horizon) {
    host.run_until(opts.horizon_ms);
    if (control::in_play(phase) || phase == control::PhaseKind::Paused)
      host.apply(input::Control{control::ev::VoiceCommand{control::Voice::Stop}});
    // Let the stop reach the devices.
    while (auto t = host.next_time()) {
      if (*t > opts.horizon_ms + 60'000) break;
      host.step();
    }
  } else if (control::in_play(phase)) {
    throw Error(ErrorCode::ScriptDeadlock, "session in " + control::describe(host.phase()) +
                                               " with no timer armed and no event pending");
  }
  result.end_ms = host.now();
  return result;
}

// Log file contents: header then one record per line.
inline std::string render_log(const nlohmann::json& header,
                              const std::vector<SessionLogRecord>& records) {
  std::string out = log_line(header) + "\n";
  for (const auto& r : records) out += log_line(to_json(r)) + "\n";
  return out;
}

}  // namespace thea::sim
