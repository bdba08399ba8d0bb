#pragma once

// Multi-session orchestrator behind the command API. Owns the device
// registry, persists one log file per session, keeps a stats cache and fans
// out log records to stream subscribers.
//
// All public methods lock one mutex, so every session sees a single ordered
// stream of mutations; callers may use the service from any thread.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "thea/clock.hpp"
#include "thea/device_sim.hpp"
#include "thea/error.hpp"
#include "thea/session_config.hpp"
#include "thea/session_log.hpp"
#include "thea/simulation.hpp"
#include "thea/stats.hpp"

namespace thea {

struct ServiceOptions {
  std::filesystem::path log_dir = "logs";
  sim::ClockMode clock = sim::ClockMode::Wall;
  std::vector<device::DeviceConfig> devices = device::default_devices();
  GameConfig game_config = GameConfig::defaults();
};

inline ServiceOptions service_options_from_json(const nlohmann::json& j) {
  ServiceOptions o;
  try {
    if (j.contains("log_dir")) o.log_dir = j.at("log_dir").get<std::string>();
    if (j.contains("devices")) o.devices = device::devices_from_json(j);
    if (j.contains("game_config")) o.game_config = game_config_from_json(j.at("game_config"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("service config: ") + e.what());
  }
  if (o.devices.size() < 2) throw Error(ErrorCode::InvalidConfig, "the service needs two devices");
  return o;
}

struct DispatchResult {
  std::optional<control::InvalidEvent> rejected;
  nlohmann::json snapshot;
};

class SessionService {
 public:
  using Subscriber = std::function<void(const SessionLogRecord&)>;

  SessionService(ServiceOptions opts, const Clock& clock) : opts_(std::move(opts)), clock_(clock) {
    std::filesystem::create_directories(opts_.log_dir);
    for (const auto& c : opts_.devices) {
      if (devices_.count(c.id)) throw Error(ErrorCode::InvalidConfig, "duplicate device " + c.id);
      devices_[c.id] = Device{sim::DeviceSlot{c.initial_state(opts_.game_config), c.transport}, {}};
      device_order_.push_back(c.id);
    }
    // Rebuild the stats cache from whatever earlier runs left behind.
    stats_ = stats_from_dir(opts_.log_dir);
    for (const auto& e : read_index(opts_.log_dir)) used_ids_.insert(e.session_id);
  }

  // Devices are taken in configuration order: the first two free ones drive
  // the left and right hands.
  std::string create_session(const SessionConfig& cfg, std::optional<std::string> id = {}) {
    std::lock_guard lock(mu_);
    pump_locked();
    validate(cfg);
    std::array<std::string, 2> ids{device_order_.at(0), device_order_.at(1)};
    for (const auto& d : ids) {
      const auto& dev = devices_.at(d);
      if (dev.session) throw Error(ErrorCode::DeviceInUse, d + " is in session " + *dev.session);
      if (dev.slot.state.kill_switch_on)
        throw Error(ErrorCode::KillSwitchEngaged, d + ": kill switch is on");
      if (!dev.slot.state.all_calibrated())
        throw Error(ErrorCode::DevicesNotCalibrated, d + " has uncalibrated channels");
    }
    std::string sid = id ? *id : next_id();
    if (sessions_.count(sid) || used_ids_.count(sid))
      throw Error(ErrorCode::InvalidConfig, "session id " + sid + " already exists");

    sim::HostOptions ho;
    ho.session_id = sid;
    ho.config = cfg;
    ho.devices = {devices_.at(ids[0]).slot, devices_.at(ids[1]).slot};
    ho.clock = opts_.clock;
    ho.start_ms = clock_.now();
    ho.keep_transcript = false;

    auto s = std::make_unique<Live>();
    s->host = std::make_unique<sim::SessionHost>(std::move(ho));
    s->devices = ids;
    s->file = sid + ".jsonl";
    s->out.open(opts_.log_dir / s->file, std::ios::trunc);
    if (!s->out) throw Error(ErrorCode::LogFormat, "cannot create log for " + sid);
    s->out << log_line(s->host->header()) << "\n";
    Live* raw = s.get();
    for (const auto& r : s->host->records()) on_record(*raw, r);
    s->host->set_sink([this, raw](const SessionLogRecord& r) { on_record(*raw, r); });
    index_log(opts_.log_dir, sid, s->file);
    used_ids_.insert(sid);
    for (const auto& d : ids) devices_.at(d).session = sid;
    sessions_[sid] = std::move(s);
    return sid;
  }

  // Verbs as in scripts: start, skip, reveal, pause, resume, stop, reset,
  // kill/release <side>, calibrate <side> <channel> <fidelity>.
  DispatchResult dispatch(const std::string& id, const std::string& verb,
                          const std::vector<std::string>& args = {}) {
    std::lock_guard lock(mu_);
    pump_locked();
    auto& s = live(id);
    if (s.closed) throw Error(ErrorCode::SessionClosed, id + " has ended");
    const auto in = sim::to_input(sim::ScriptLine{clock_.now(), verb, args});
    DispatchResult r{s.host->apply(in), nlohmann::json()};
    settle(s);
    r.snapshot = snapshot_locked(s);
    return r;
  }

  nlohmann::json snapshot(const std::string& id) {
    std::lock_guard lock(mu_);
    pump_locked();
    return snapshot_locked(live(id));
  }

  nlohmann::json list_sessions() {
    std::lock_guard lock(mu_);
    pump_locked();
    nlohmann::json out = nlohmann::json::array();
    for (const auto& [id, s] : sessions_)
      out.push_back({{"session_id", id},
                     {"phase", control::describe(s->host->phase())},
                     {"closed", s->closed}});
    return out;
  }

  PlayerStats stats(const std::string& player) {
    std::lock_guard lock(mu_);
    pump_locked();
    return stats_.get(player);
  }

  nlohmann::json device(const std::string& id) {
    std::lock_guard lock(mu_);
    pump_locked();
    return device_json(dev(id));
  }

  nlohmann::json devices() {
    std::lock_guard lock(mu_);
    pump_locked();
    nlohmann::json out = nlohmann::json::array();
    for (const auto& id : device_order_) out.push_back(device_json(devices_.at(id)));
    return out;
  }

  // The physical calibration procedure. A device in a session is calibrated
  // over its link; an idle one directly.
  nlohmann::json calibrate(const std::string& id, int channel, double fidelity) {
    std::lock_guard lock(mu_);
    pump_locked();
    auto& d = dev(id);
    if (d.session) {
      auto& s = live(*d.session);
      if (d.slot.state.kill_switch_on || s.host->device(side_of(s, id)).kill_switch_on)
        throw Error(ErrorCode::KillSwitchEngaged, id + ": kill switch is on");
      if (!device::valid_channel(channel))
        throw Error(ErrorCode::UnknownChannel, "channel " + std::to_string(channel));
      s.host->apply(sim::input::Calibrate{side_of(s, id), channel, fidelity});
      settle(s);
    } else {
      d.slot.state = device::calibrate(d.slot.state, channel, fidelity);
    }
    return device_json(d);
  }

  // Flips the physical kill switch, or sets it when `engage` is given.
  nlohmann::json toggle_kill(const std::string& id, std::optional<bool> engage = {}) {
    std::lock_guard lock(mu_);
    pump_locked();
    auto& d = dev(id);
    if (d.session) {
      auto& s = live(*d.session);
      const auto side = side_of(s, id);
      const bool on = s.host->device(side).kill_switch_on;
      s.host->apply(sim::input::ToggleKill{side, engage.value_or(!on)});
      settle(s);
    } else {
      const bool want = engage.value_or(!d.slot.state.kill_switch_on);
      if (want != d.slot.state.kill_switch_on)
        d.slot.state = device::toggle_kill_switch(d.slot.state, clock_.now()).state;
    }
    return device_json(d);
  }

  // Subscribes to a session's records, replaying those with seq >= from
  // first. Returns a token for unsubscribe.
  std::uint64_t subscribe(const std::string& id, std::uint64_t from, Subscriber fn) {
    std::lock_guard lock(mu_);
    pump_locked();
    auto& s = live(id);
    for (const auto& r : s.host->records())
      if (r.seq >= from) fn(r);
    const auto token = next_token_++;
    s.subscribers[token] = std::move(fn);
    return token;
  }

  void unsubscribe(const std::string& id, std::uint64_t token) {
    std::lock_guard lock(mu_);
    if (auto it = sessions_.find(id); it != sessions_.end()) it->second->subscribers.erase(token);
  }

  // Runs every session up to the clock's current reading.
  void pump() {
    std::lock_guard lock(mu_);
    pump_locked();
  }

  std::optional<TimeMs> next_due() {
    std::lock_guard lock(mu_);
    std::optional<TimeMs> t;
    for (const auto& [_, s] : sessions_) {
      if (s->released) continue;
      if (auto n = s->host->next_time(); n && (!t || *n < *t)) t = n;
    }
    return t;
  }

  const std::filesystem::path& log_dir() const { return opts_.log_dir; }

 private:
  struct Device {
    sim::DeviceSlot slot;
    std::optional<std::string> session;
  };

  struct Live {
    std::unique_ptr<sim::SessionHost> host;
    std::array<std::string, 2> devices;
    std::string file;
    std::ofstream out;
    std::map<std::uint64_t, Subscriber> subscribers;
    bool closed = false;    // play is over; no more spectator input
    bool released = false;  // devices handed back to the registry
  };

  std::string next_id() {
    for (;;) {
      std::string id = "s" + std::to_string(++id_counter_);
      if (!sessions_.count(id) && !used_ids_.count(id)) return id;
    }
  }

  Live& live(const std::string& id) {
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "no session " + id);
    return *it->second;
  }

  Device& dev(const std::string& id) {
    auto it = devices_.find(id);
    if (it == devices_.end()) throw Error(ErrorCode::UnknownDevice, "no device " + id);
    return it->second;
  }

  static HandSide side_of(const Live& s, const std::string& device) {
    return s.devices[0] == device ? HandSide::Left : HandSide::Right;
  }

  void on_record(Live& s, const SessionLogRecord& r) {
    s.out << log_line(to_json(r)) << "\n";
    s.out.flush();
    stats_.add(r);
    for (auto& [_, fn] : s.subscribers) fn(r);
  }

  void pump_locked() {
    const TimeMs now = clock_.now();
    for (auto& [_, s] : sessions_) {
      if (s->released) continue;
      s->host->run_until(now);
      settle(*s);
    }
  }

  // A session that reached Completed or SafeOff has ended its play. Once
  // nothing is left in flight its devices go back to the registry with
  // whatever calibration and switch state they now have.
  void settle(Live& s) {
    const auto k = s.host->phase().kind;
    if (k == control::PhaseKind::Completed || k == control::PhaseKind::SafeOff) s.closed = true;
    if (!s.closed || s.released || s.host->busy()) return;
    s.released = true;
    for (std::size_t i = 0; i < 2; ++i) {
      auto& d = devices_.at(s.devices[i]);
      d.slot.state = s.host->device(static_cast<HandSide>(i));
      d.session.reset();
    }
  }

  nlohmann::json snapshot_locked(const Live& s) const {
    auto j = s.host->snapshot();
    j["closed"] = s.closed;
    j["released"] = s.released;
    j["device_ids"] = s.devices;
    return j;
  }

  nlohmann::json device_json(const Device& d) const {
    // A device in a session is reported as the session sees it.
    nlohmann::json j;
    if (d.session) {
      const auto& s = *sessions_.at(*d.session);
      j = device::to_json(s.host->device(side_of(s, d.slot.state.id)));
      j["session_id"] = *d.session;
    } else {
      j = device::to_json(d.slot.state);
      j["session_id"] = nullptr;
    }
    return j;
  }

  ServiceOptions opts_;
  const Clock& clock_;
  std::mutex mu_;
  std::map<std::string, Device> devices_;
  std::vector<std::string> device_order_;
  std::map<std::string, std::unique_ptr<Live>> sessions_;
  std::set<std::string> used_ids_;
  StatsIndex stats_;
  std::uint64_t id_counter_ = 0;
  std::uint64_t next_token_ = 1;
};

}  // namespace thea
