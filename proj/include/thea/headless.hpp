#pragma once

// Headless runs on the virtual clock, and their replay. A run's log header
// carries the script and horizon next to the config, seed and devices, so the
// log alone is enough to rerun the session and compare the bytes.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "thea/device_sim.hpp"
#include "thea/error.hpp"
#include "thea/session_config.hpp"
#include "thea/session_log.hpp"
#include "thea/simulation.hpp"
#include "thea/stats.hpp"

namespace thea {

struct HeadlessRun {
  std::string session_id = "run";
  SessionConfig config;
  std::vector<device::DeviceConfig> devices = device::default_devices();
  std::vector<sim::ScriptLine> script;
  TimeMs horizon_ms = 3'600'000;
};

struct HeadlessResult {
  nlohmann::json header;
  std::vector<SessionLogRecord> records;
  std::vector<std::string> transcript;  // JSON lines
  sim::RunResult run;
  std::string log;  // exact file contents
};

inline HeadlessResult run_headless(const HeadlessRun& job, bool keep_transcript = false) {
  sim::HostOptions ho;
  ho.session_id = job.session_id;
  ho.config = job.config;
  ho.devices = sim::slots_from_configs(job.devices, job.config.game_config);
  ho.clock = sim::ClockMode::Virtual;
  ho.keep_transcript = keep_transcript;
  sim::SessionHost host(std::move(ho));

  HeadlessResult out;
  out.run = sim::run_to_completion(host, {job.script, job.horizon_ms});
  out.header = host.header();
  nlohmann::json lines = nlohmann::json::array();
  for (const auto& l : job.script) lines.push_back(sim::format_script_line(l));
  out.header["script"] = lines;
  out.header["horizon_ms"] = job.horizon_ms;
  out.records = host.records();
  if (keep_transcript) out.transcript = host.transcript();
  out.log = sim::render_log(out.header, out.records);
  return out;
}

// Recovers the run that produced a header.
inline HeadlessRun run_from_header(const nlohmann::json& h) {
  HeadlessRun job;
  try {
    if (h.at("clock") != "virtual")
      throw Error(ErrorCode::LogFormat, "only virtual-clock logs can be replayed");
    job.session_id = h.at("session_id").get<std::string>();
    job.config = session_config_from_json(h.at("config"));
    job.devices.clear();
    for (const auto& d : h.at("devices")) job.devices.push_back(device::device_config_from_json(d));
    for (const auto& l : h.at("script")) job.script.push_back(sim::parse_script_line(l.get<std::string>()));
    job.horizon_ms = h.at("horizon_ms").get<TimeMs>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::LogFormat, std::string("header: ") + e.what());
  }
  return job;
}

struct ReplayReport {
  bool identical = false;
  std::size_t first_diff_line = 0;  // 1-based, 0 when identical
  std::string expected, actual;     // the differing lines
};

inline ReplayReport replay_log_text(const std::string& text) {
  std::istringstream in(text);
  std::string first;
  std::getline(in, first);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(first);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::LogFormat, std::string("header: ") + e.what());
  }
  const auto again = run_headless(run_from_header(header)).log;

  ReplayReport r;
  r.identical = again == text;
  if (r.identical) return r;
  std::istringstream a(text), b(again);
  std::string la, lb;
  for (std::size_t n = 1;; ++n) {
    const bool ga = static_cast<bool>(std::getline(a, la));
    const bool gb = static_cast<bool>(std::getline(b, lb));
    if (!ga && !gb) {
      // Same lines, different bytes: trailing newline.
      r.first_diff_line = n;
      break;
    }
    if (!ga || !gb || la != lb) {
      r.first_diff_line = n;
      r.expected = ga ? la : "<end of file>";
      r.actual = gb ? lb : "<end of file>";
      break;
    }
  }
  return r;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::LogFormat, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes the log and lists it in the index of the directory it lands in.
inline void write_run(const std::filesystem::path& out, const HeadlessResult& r) {
  const auto dir = out.has_parent_path() ? out.parent_path() : std::filesystem::path(".");
  std::filesystem::create_directories(dir);
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::LogFormat, "cannot write " + out.string());
  f << r.log;
  f.close();
  index_log(dir, r.header.at("session_id").get<std::string>(), out.filename().string());
}

}  // namespace thea
