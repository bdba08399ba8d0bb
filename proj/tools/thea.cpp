// thea: headless runs, replay checks, the live service and player stats.

#include <csignal>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "thea/headless.hpp"
#include "thea/server.hpp"

using namespace thea;

namespace {

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot read " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path + ": " + e.what());
  }
}

struct RunArgs {
  std::string game = "godai";
  std::string mode;
  std::uint64_t seed = 0;
  std::string script, out, config, transcript, session_id = "run", sound = "two-pitch";
  std::vector<std::string> nicknames{"player"};
  TimeMs horizon_ms = 3'600'000;
};

int cmd_run(const RunArgs& a) {
  nlohmann::json cfg = {{"game", a.game}, {"seed", a.seed}, {"sound", a.sound}, {"nicknames", a.nicknames}};
  if (!a.mode.empty()) cfg["mode"] = a.mode;

  HeadlessRun job;
  job.session_id = a.session_id;
  job.horizon_ms = a.horizon_ms;
  if (!a.config.empty()) {
    // Same file the service reads: devices and game_config, plus optional
    // session-level timing and a preset deck.
    const auto file = read_json(a.config);
    const auto opts = service_options_from_json(file);
    job.devices.assign(opts.devices.begin(), opts.devices.begin() + 2);
    if (file.contains("game_config")) cfg["game_config"] = file["game_config"];
    if (file.contains("timing")) cfg["timing"] = file["timing"];
    if (file.contains("deck")) cfg["deck"] = file["deck"];
  }
  job.config = session_config_from_json(cfg);
  if (!a.script.empty()) {
    std::ifstream in(a.script);
    if (!in) throw Error(ErrorCode::ScriptParse, "cannot read " + a.script);
    job.script = sim::parse_script(in);
  }

  const auto r = run_headless(job, !a.transcript.empty());
  write_run(a.out, r);
  if (!a.transcript.empty()) {
    std::ofstream t(a.transcript, std::ios::trunc);
    for (const auto& line : r.transcript) t << line << "\n";
  }
  std::cerr << a.out << ": " << r.records.size() << " records, ended at " << r.run.end_ms << " ms"
            << (r.run.hit_horizon ? " (horizon)" : "") << "\n";
  return 0;
}

int cmd_replay(const std::string& log) {
  const auto r = replay_log_text(read_file(log));
  if (r.identical) {
    std::cout << log << ": identical\n";
    return 0;
  }
  std::cout << log << ": differs at line " << r.first_diff_line << "\n"
            << "  log:    " << r.expected << "\n"
            << "  replay: " << r.actual << "\n";
  return 1;
}

int cmd_serve(unsigned short port, const std::string& config, const std::string& address) {
  ServiceOptions opts;
  if (!config.empty()) opts = service_options_from_json(read_json(config));
  opts.clock = sim::ClockMode::Wall;

  // Block the signals before any thread starts so only sigwait sees them.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  WallClock clock;
  SessionService service(opts, clock);
  Server server(service, port, address);
  server.start();
  std::cout << "listening on " << address << ":" << server.port() << ", logs in " << opts.log_dir.string()
            << std::endl;
  int sig = 0;
  sigwait(&set, &sig);
  server.stop();
  return 0;
}

int cmd_stats(const std::string& player, const std::string& log_dir) {
  std::cout << to_json(stats_from_dir(log_dir).get(player)).dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"thea: fused-spectatorship sessions with virtual EMS devices"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "run one session headless on the virtual clock");
  run_cmd->add_option("--game", run.game, "godai, epta or idio")
      ->check(CLI::IsMember({"godai", "epta", "idio"}));
  run_cmd->add_option("--mode", run.mode, "bo3, bo5 or free (Godai only; others are free)")
      ->check(CLI::IsMember({"bo3", "bo5", "free"}));
  run_cmd->add_option("--seed", run.seed, "session seed");
  run_cmd->add_option("--script", run.script, "timed input script");
  run_cmd->add_option("--out", run.out, "log file to write")->required();
  run_cmd->add_option("--config", run.config, "devices / game_config / timing / deck JSON");
  run_cmd->add_option("--sound", run.sound)->check(CLI::IsMember({"two-pitch", "first-pitch", "off"}));
  run_cmd->add_option("--nickname", run.nicknames, "one (solo) or two (shared)")->expected(1, 2);
  run_cmd->add_option("--session-id", run.session_id);
  run_cmd->add_option("--horizon-ms", run.horizon_ms, "stop free play at this time");
  run_cmd->add_option("--transcript", run.transcript, "also write the full event/effect trace");

  std::string log;
  auto* replay_cmd = app.add_subcommand("replay", "rerun a logged session and compare bytes");
  replay_cmd->add_option("--log", log)->required();

  unsigned short port = 8080;
  std::string serve_config, address = "127.0.0.1";
  auto* serve_cmd = app.add_subcommand("serve", "run the live service");
  serve_cmd->add_option("--port", port);
  serve_cmd->add_option("--config", serve_config, "service JSON: log_dir, devices, game_config");
  serve_cmd->add_option("--address", address);

  std::string player, log_dir = "logs";
  auto* stats_cmd = app.add_subcommand("stats", "per-game play counts and durations");
  stats_cmd->add_option("--player", player)->required();
  stats_cmd->add_option("--log-dir", log_dir);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run_cmd) return cmd_run(run);
    if (*replay_cmd) return cmd_replay(log);
    if (*serve_cmd) return cmd_serve(port, serve_config, address);
    if (*stats_cmd) return cmd_stats(player, log_dir);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
