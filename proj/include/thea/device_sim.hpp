#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "thea/clock.hpp"
#include "thea/error.hpp"
#include "thea/game_config.hpp"
#include "thea/gesture.hpp"
#include "thea/rng.hpp"
#include "thea/transport.hpp"
#include "thea/wire_protocol.hpp"

namespace thea::device {

inline constexpr int kChannels = 4;
inline constexpr int kDeviceMassGrams = 350;
inline constexpr TimeMs kUsageLimitMs = 30 * 60 * 1000;

struct ChannelState {
  int index = 1;
  bool calibrated = false;
  double fidelity = 0.0;  // P(actuation renders completely); 0 when uncalibrated
  std::optional<TimeMs> active_until;
  TimeMs started_at = 0;
  Completeness pending = Completeness::None;  // drawn when the actuation starts

  bool active() const { return active_until.has_value(); }
  friend bool operator==(const ChannelState&, const ChannelState&) = default;
};

// One wearable unit: an EMS device plus the microcontroller that splits its
// single output into four switchable channels.
struct DeviceState {
  std::string id;
  std::array<ChannelState, kChannels> channels{};
  std::array<std::optional<Gesture>, kChannels> channel_gesture{};
  bool kill_switch_on = false;
  int manual_intensity = 1;  // set on the physical dial; logged only
  TimeMs cumulative_on_ms = 0;
  bool usage_notified = false;

  static DeviceState make(std::string id, const GameConfig& config = GameConfig::defaults()) {
    DeviceState d;
    d.id = std::move(id);
    for (int i = 0; i < kChannels; ++i) {
      d.channels[i].index = i + 1;
      d.channel_gesture[i] = config.gesture_for_channel(i + 1);
    }
    return d;
  }

  ChannelState& channel(int index) { return channels[static_cast<std::size_t>(index - 1)]; }
  const ChannelState& channel(int index) const {
    return channels[static_cast<std::size_t>(index - 1)];
  }

  std::optional<int> active_channel() const {
    for (const auto& c : channels)
      if (c.active()) return c.index;
    return std::nullopt;
  }

  bool all_calibrated() const {
    for (const auto& c : channels)
      if (!c.calibrated) return false;
    return true;
  }

  std::uint8_t calibrated_mask() const {
    std::uint8_t m = 0;
    for (const auto& c : channels)
      if (c.calibrated) m |= static_cast<std::uint8_t>(1u << (c.index - 1));
    return m;
  }

  friend bool operator==(const DeviceState&, const DeviceState&) = default;
};

struct ActuationReport {
  std::string device;
  int channel = 0;  // 0 for OpenPalm, which drives nothing
  Gesture gesture = Gesture::OpenPalm;
  Completeness completeness = Completeness::Complete;
  TimeMs at = 0;
  TimeMs active_ms = 0;
  friend bool operator==(const ActuationReport&, const ActuationReport&) = default;
};

inline bool valid_channel(int ch) { return ch >= 1 && ch <= kChannels; }

inline DeviceState calibrate(const DeviceState& d, int channel, double fidelity) {
  if (d.kill_switch_on) throw Error(ErrorCode::KillSwitchEngaged, d.id + ": kill switch is on");
  if (!valid_channel(channel))
    throw Error(ErrorCode::UnknownChannel, "channel " + std::to_string(channel));
  if (!(fidelity >= 0.0 && fidelity <= 1.0))
    throw Error(ErrorCode::InvalidFidelity, "fidelity must lie in [0,1]");
  DeviceState next = d;
  next.channel(channel).calibrated = true;
  next.channel(channel).fidelity = fidelity;
  return next;
}

struct UsageResult {
  DeviceState state;
  bool limit_reached = false;  // true exactly once per session
};

inline UsageResult accrue_usage(const DeviceState& d, TimeMs active_ms) {
  UsageResult r{d, false};
  if (active_ms <= 0) return r;
  r.state.cumulative_on_ms += active_ms;
  if (!r.state.usage_notified && r.state.cumulative_on_ms >= kUsageLimitMs) {
    r.state.usage_notified = true;
    r.limit_reached = true;
  }
  return r;
}

// Output of any device step: new state plus everything it emits.
struct StepResult {
  DeviceState state;
  std::vector<wire::Frame> responses;
  std::optional<ActuationReport> report;  // scheduled (handle_frame) or delivered (tick)
  bool usage_limit_reached = false;
};

namespace detail {
// Stops the active channel early, counting the time it was on. Pending
// reports for the stopped actuation are discarded.
inline bool stop_active(DeviceState& d, TimeMs now) {
  for (auto& c : d.channels) {
    if (!c.active()) continue;
    const TimeMs on = std::max<TimeMs>(0, std::min(now, *c.active_until) - c.started_at);
    c.active_until.reset();
    auto u = accrue_usage(d, on);
    d = u.state;
    return u.limit_reached;
  }
  return false;
}
}  // namespace detail

inline StepResult handle_frame(const DeviceState& d, const wire::Frame& f, TimeMs now,
                               SessionRng& rng) {
  StepResult r{d, {}, std::nullopt, false};
  if (d.kill_switch_on) {
    r.responses.push_back(wire::Frame{wire::EventKill{true}});
    return r;
  }
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, wire::Actuate>) {
          if (!valid_channel(p.channel))
            throw Error(ErrorCode::UnknownChannel, "channel " + std::to_string(p.channel));
          if (p.duration_ms > wire::kMaxActuationMs)
            throw Error(ErrorCode::InvalidFrame, "ACTUATE duration exceeds 2000 ms");
          if (d.active_channel())
            throw Error(ErrorCode::Busy, d.id + ": channel " +
                                             std::to_string(*d.active_channel()) + " is active");
          auto& c = r.state.channel(p.channel);
          c.started_at = now;
          c.active_until = now + p.duration_ms;
          c.pending = !c.calibrated           ? Completeness::None
                      : rng.bernoulli(c.fidelity) ? Completeness::Complete
                                                  : Completeness::Partial;
          r.report = ActuationReport{d.id,
                                     p.channel,
                                     d.channel_gesture[p.channel - 1].value_or(Gesture::OpenPalm),
                                     c.pending,
                                     *c.active_until,
                                     p.duration_ms};
        } else if constexpr (std::is_same_v<T, wire::StopAll>) {
          r.usage_limit_reached = detail::stop_active(r.state, now);
        } else if constexpr (std::is_same_v<T, wire::StatusReq>) {
          const auto active = d.active_channel();
          r.responses.push_back(wire::Frame{wire::StatusResp{
              false, static_cast<std::uint8_t>(d.manual_intensity),
              static_cast<std::uint8_t>(active.value_or(0)), d.calibrated_mask(),
              static_cast<std::uint32_t>(d.cumulative_on_ms)}});
        } else if constexpr (std::is_same_v<T, wire::Ping>) {
          r.responses.push_back(wire::Frame{wire::Pong{}});
        } else if constexpr (std::is_same_v<T, wire::CalibrateSet>) {
          r.state = calibrate(d, p.channel, p.fidelity_bp / double(wire::kFidelityScale));
        }
        // Device-to-controller kinds arriving here are ignored.
      },
      f.payload);
  return r;
}

// Earliest instant at which tick() has work to do.
inline std::optional<TimeMs> next_deadline(const DeviceState& d) {
  std::optional<TimeMs> t;
  for (const auto& c : d.channels)
    if (c.active() && (!t || *c.active_until < *t)) t = c.active_until;
  return t;
}

// Completes the actuation whose deadline has passed, emitting ACTUATION_DONE.
inline StepResult tick(const DeviceState& d, TimeMs now) {
  StepResult r{d, {}, std::nullopt, false};
  for (auto& c : r.state.channels) {
    if (!c.active() || *c.active_until > now) continue;
    const TimeMs at = *c.active_until;
    const TimeMs on = at - c.started_at;
    c.active_until.reset();
    auto u = accrue_usage(r.state, on);
    r.state = u.state;
    r.usage_limit_reached = u.limit_reached;
    r.responses.push_back(wire::Frame{wire::ActuationDone{
        static_cast<std::uint8_t>(c.index), c.pending, static_cast<std::uint16_t>(on)}});
    r.report = ActuationReport{d.id, c.index,
                               d.channel_gesture[c.index - 1].value_or(Gesture::OpenPalm),
                               c.pending, at, on};
    break;  // at most one channel is ever active
  }
  return r;
}

// Engaging stops stimulation in the same step; releasing re-enables frame
// handling. Calibration is untouched either way.
inline StepResult toggle_kill_switch(const DeviceState& d, TimeMs now) {
  StepResult r{d, {}, std::nullopt, false};
  if (!d.kill_switch_on) {
    r.usage_limit_reached = detail::stop_active(r.state, now);
    r.state.kill_switch_on = true;
  } else {
    r.state.kill_switch_on = false;
  }
  r.responses.push_back(wire::Frame{wire::EventKill{r.state.kill_switch_on}});
  return r;
}

// Usage accounting restarts with each session.
inline DeviceState begin_session(const DeviceState& d) {
  DeviceState next = d;
  next.cumulative_on_ms = 0;
  next.usage_notified = false;
  return next;
}

// ---------------------------------------------------------------------------
// Device config file

struct DeviceConfig {
  std::string id;
  int intensity = 1;
  std::array<std::optional<double>, kChannels> fidelity{};  // set = calibrated
  wire::TransportParams transport;

  DeviceState initial_state(const GameConfig& game) const {
    DeviceState d = DeviceState::make(id, game);
    d.manual_intensity = intensity;
    for (int ch = 1; ch <= kChannels; ++ch)
      if (const auto& f = fidelity[static_cast<std::size_t>(ch - 1)]) d = calibrate(d, ch, *f);
    return d;
  }
};

inline DeviceConfig device_config_from_json(const nlohmann::json& j) {
  DeviceConfig c;
  try {
    c.id = j.at("id").get<std::string>();
    c.intensity = j.value("intensity", 1);
    if (c.intensity < 1 || c.intensity > 10)
      throw Error(ErrorCode::InvalidConfig, c.id + ": intensity must be 1..10");
    if (j.contains("channels")) {
      for (const auto& ch : j.at("channels")) {
        const int index = ch.at("channel").get<int>();
        if (!valid_channel(index))
          throw Error(ErrorCode::UnknownChannel, c.id + ": channel " + std::to_string(index));
        const double f = ch.at("fidelity").get<double>();
        if (!(f >= 0.0 && f <= 1.0))
          throw Error(ErrorCode::InvalidFidelity, c.id + ": fidelity must lie in [0,1]");
        c.fidelity[static_cast<std::size_t>(index - 1)] = f;
      }
    }
    if (j.contains("transport")) c.transport = wire::transport_from_json(j.at("transport"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("device config: ") + e.what());
  }
  return c;
}

inline nlohmann::json to_json(const DeviceConfig& c) {
  nlohmann::json channels = nlohmann::json::array();
  for (int ch = 1; ch <= kChannels; ++ch)
    if (const auto& f = c.fidelity[static_cast<std::size_t>(ch - 1)])
      channels.push_back({{"channel", ch}, {"fidelity", *f}});
  return {{"id", c.id},
          {"intensity", c.intensity},
          {"channels", channels},
          {"transport", wire::to_json(c.transport)}};
}

// The config that recreates a device's current calibration.
inline DeviceConfig config_of(const DeviceState& d, const wire::TransportParams& link) {
  DeviceConfig c;
  c.id = d.id;
  c.intensity = d.manual_intensity;
  for (const auto& ch : d.channels)
    if (ch.calibrated) c.fidelity[static_cast<std::size_t>(ch.index - 1)] = ch.fidelity;
  c.transport = link;
  return c;
}

inline std::vector<DeviceConfig> devices_from_json(const nlohmann::json& j) {
  std::vector<DeviceConfig> out;
  if (!j.contains("devices")) return out;
  for (const auto& d : j.at("devices")) out.push_back(device_config_from_json(d));
  return out;
}

// Two fully calibrated units with a small fixed link latency.
inline std::vector<DeviceConfig> default_devices() {
  std::vector<DeviceConfig> out;
  for (const char* id : {"left", "right"}) {
    DeviceConfig c;
    c.id = id;
    c.intensity = 5;
    c.fidelity.fill(0.9);
    c.transport = wire::TransportParams::fixed(5);
    out.push_back(c);
  }
  return out;
}

inline nlohmann::json to_json(const DeviceState& d) {
  nlohmann::json channels = nlohmann::json::array();
  for (const auto& c : d.channels)
    channels.push_back({{"channel", c.index},
                        {"calibrated", c.calibrated},
                        {"fidelity", c.fidelity},
                        {"active", c.active()}});
  return {{"id", d.id},
          {"kill_switch_on", d.kill_switch_on},
          {"intensity", d.manual_intensity},
          {"cumulative_on_ms", d.cumulative_on_ms},
          {"usage_notified", d.usage_notified},
          {"mass_g", kDeviceMassGrams},
          {"channels", channels}};
}

}  // namespace thea::device
