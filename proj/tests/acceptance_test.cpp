// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
// fails. Everything runs headless on the virtual clock; the determinism and
// statistics checks go through the thea binary itself.

#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "thea/headless.hpp"
#include "thea/wire_protocol.hpp"
#include "wire_gen.hpp"

#ifndef THEA_CLI
#error "THEA_CLI must name the thea binary"
#endif

using namespace thea;
namespace fs = std::filesystem;
using nlohmann::json;
using control::PhaseKind;

namespace {

struct Failed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Collects the first few failures of a criterion; any failure fails it.
struct Check {
  std::vector<std::string> failures;
  void operator()(bool ok, const std::string& what) {
    if (!ok && failures.size() < 5) failures.push_back(what);
    if (!ok) ++count;
  }
  std::size_t count = 0;
};

struct Verdict {
  bool pass;
  std::string detail;
};

Verdict verdict(const Check& c, const std::string& ok_detail) {
  if (c.count == 0) return {true, ok_detail};
  std::string d = std::to_string(c.count) + " failure(s): ";
  for (std::size_t i = 0; i < c.failures.size(); ++i) d += (i ? "; " : "") + c.failures[i];
  return {false, d};
}

const GameConfig kConfig = GameConfig::defaults();

Gesture by_element(Element e) { return kConfig.gesture_for(e); }

Gesture by_number(int n) {
  for (Gesture g : kAllGestures)
    if (kConfig.number_of(g) == n) return g;
  throw Failed("no gesture carries number " + std::to_string(n));
}

std::vector<SessionLogRecord> of_kind(const std::vector<SessionLogRecord>& recs, RecordKind k) {
  std::vector<SessionLogRecord> out;
  for (const auto& r : recs)
    if (r.kind == k) out.push_back(r);
  return out;
}

std::vector<json> parsed(const std::vector<std::string>& transcript) {
  std::vector<json> out;
  out.reserve(transcript.size());
  for (const auto& line : transcript) out.push_back(json::parse(line));
  return out;
}

std::vector<json> effects(const std::vector<json>& trace, std::string_view name) {
  std::vector<json> out;
  for (const auto& j : trace)
    if (j["source"] == "effect" && j["effect"]["effect"] == name) out.push_back(j);
  return out;
}

sim::HostOptions host_options(GameKind game, GodaiMode mode, std::uint64_t seed,
                              control::SoundMode sound = control::SoundMode::TwoPitch) {
  sim::HostOptions o;
  o.session_id = "acceptance";
  o.config.game = game;
  o.config.mode = mode;
  o.config.seed = seed;
  o.config.sound = sound;
  o.devices = sim::slots_from_configs(device::default_devices(), o.config.game_config);
  return o;
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return out + "'";
}

int run_cli(const std::string& args) {
  const std::string cmd = shell_quote(THEA_CLI) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string cli_output(const std::string& args) {
  const std::string cmd = shell_quote(THEA_CLI) + " " + args + " 2>/dev/null";
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) throw Failed("cannot run " + cmd);
  std::string out;
  char buf[4096];
  while (const auto n = std::fread(buf, 1, sizeof buf, p)) out.append(buf, n);
  if (pclose(p) != 0) throw Failed("non-zero exit from " + cmd);
  return out;
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("thea_acceptance_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// ---------------------------------------------------------------------------

Verdict godai_golden_match() {
  Check check;
  HeadlessRun job;
  job.config.game = GameKind::Godai;
  job.config.mode = GodaiMode::BestOf3;
  job.config.seed = 6;
  // Decks list [left, right].
  job.config.deck = {{by_element(Element::Metal), by_element(Element::Earth)},
                      {by_element(Element::Metal), by_element(Element::Fire)},
                      {by_element(Element::Earth), by_element(Element::Metal)}};

  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run_headless(job);
  const double wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

  const std::array<const char*, 3> expected{"LeftWins", "RightWins", "RightWins"};
  const auto rounds = of_kind(r.records, RecordKind::RoundResolved);
  check(rounds.size() == 3, "expected 3 resolved rounds, got " + std::to_string(rounds.size()));
  for (std::size_t i = 0; i < std::min<std::size_t>(3, rounds.size()); ++i)
    check(rounds[i].detail["outcome"]["result"] == expected[i],
          "round " + std::to_string(i + 1) + " " + rounds[i].detail["outcome"]["result"].dump());
  std::string summary;
  if (!rounds.empty()) {
    const auto& last = rounds.back().detail["outcome"];
    summary = last.value("summary", "");
    check(last["winner"] == "right", "winner " + last.value("winner", std::string("none")));
    check(last["score"]["right"] == 2 && last["score"]["left"] == 1, "score " + last["score"].dump());
    check(summary == "right wins 2 to 1", "summary '" + summary + "'");
  }
  const auto ended = of_kind(r.records, RecordKind::SessionEnded);
  check(ended.size() == 1 && ended[0].detail["reason"] == "completed", "session did not complete");
  check(wall_ms < 1000.0, "took " + std::to_string(wall_ms) + " ms");
  std::ostringstream d;
  d << summary << ", " << r.run.end_ms << " virtual ms in " << wall_ms << " ms wall";
  return verdict(check, d.str());
}

Verdict epta_golden_game() {
  Check check;
  // Reveals alternate right, left: right 1,0,1 and left 5,0,2.
  const std::vector<std::pair<HandSide, int>> turns{{HandSide::Right, 1}, {HandSide::Left, 5},
                                                    {HandSide::Right, 0}, {HandSide::Left, 0},
                                                    {HandSide::Right, 1}, {HandSide::Left, 2}};
  HeadlessRun job;
  job.config.game = GameKind::Epta;
  job.config.mode = GodaiMode::FreePlay;
  job.config.seed = 7;
  for (const auto& [side, n] : turns) job.config.deck.push_back({by_number(n)});
  const auto r = run_headless(job);

  const auto rounds = of_kind(r.records, RecordKind::RoundResolved);
  check(rounds.size() == turns.size(), "resolved " + std::to_string(rounds.size()) + " rounds");
  std::array<int, 2> sums{};
  for (std::size_t i = 0; i < std::min(rounds.size(), turns.size()); ++i) {
    const auto& shown = rounds[i].detail["shown"];
    check(shown.size() == 1 && shown[0]["hand"] == std::string(to_string(turns[i].first)),
          "round " + std::to_string(i + 1) + " played by " + shown.dump());
    sums[index_of(turns[i].first)] += turns[i].second;
  }
  check(sums[index_of(HandSide::Left)] == 7, "oracle left sum " + std::to_string(sums[0]));
  if (!rounds.empty()) {
    const auto& last = rounds.back().detail["outcome"];
    check(last.value("won", "") == "left", "outcome " + last.dump());
    check(last["sums"]["left"] == 7, "left sum " + last["sums"]["left"].dump());
    check(last["sums"]["right"] == sums[index_of(HandSide::Right)], "right sum " + last["sums"]["right"].dump());
  }

  // Continuing the finished game must be refused.
  EptaState s;
  for (const auto& [side, n] : turns) s = epta_apply(s, n);
  int refused = 0, tried = 0;
  for (int n : {0, 1, 2, 3, 5}) {
    ++tried;
    try {
      epta_apply(s, n);
    } catch (const Error& e) {
      refused += e.code() == ErrorCode::GameOver;
    }
  }
  ++tried;
  SessionRng rng(1);
  try {
    control::plan_round(s, kConfig, rng);
  } catch (const Error& e) {
    refused += e.code() == ErrorCode::GameOver;
  }
  check(refused == tried, std::to_string(tried - refused) + " continuation(s) not refused with GameOver");
  return verdict(check, "Won(Left) at 7; " + std::to_string(refused) + "/" + std::to_string(tried) +
                            " continuations raised GameOver");
}

Verdict idio_golden_prefix() {
  Check check;
  const Gesture fire = by_element(Element::Fire), metal = by_element(Element::Metal),
                wood = by_element(Element::Wood);
  constexpr int kSeeds = 500;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    HeadlessRun job;
    job.config.game = GameKind::Idio;
    job.config.mode = GodaiMode::FreePlay;
    job.config.seed = seed;
    job.config.deck = {{fire, metal}, {metal, metal}, {wood, wood}};
    const auto r = run_headless(job);

    // Fold the struck set from what was shown: a gesture is struck when both
    // hands show it in the same round.
    std::set<std::string> struck;
    bool showed_struck = false;
    const auto rounds = of_kind(r.records, RecordKind::RoundResolved);
    for (std::size_t i = 0; i < rounds.size(); ++i) {
      const auto& shown = rounds[i].detail["shown"];
      for (const auto& h : shown) showed_struck |= struck.count(h["gesture"].get<std::string>()) > 0;
      if (shown.size() == 2 && shown[0]["gesture"] == shown[1]["gesture"])
        struck.insert(shown[0]["gesture"].get<std::string>());
      if (i == 2)
        check(struck == std::set<std::string>{std::string(to_string(metal)), std::string(to_string(wood))},
              "seed " + std::to_string(seed) + ": struck after prefix has " + std::to_string(struck.size()));
    }
    check(!showed_struck, "seed " + std::to_string(seed) + ": a struck gesture was shown");
    check(struck.size() == 5, "seed " + std::to_string(seed) + ": ended with " + std::to_string(struck.size()));
    check(!rounds.empty() && rounds.back().detail["outcome"]["struck_total"] == 5,
          "seed " + std::to_string(seed) + ": log disagrees on struck_total");
    const auto ended = of_kind(r.records, RecordKind::SessionEnded);
    check(ended.size() == 1 && ended[0].detail["reason"] == "completed",
          "seed " + std::to_string(seed) + ": did not complete");
  }
  return verdict(check, "prefix strikes {Metal, Wood}; " + std::to_string(kSeeds) +
                            " seeded continuations end with 5 struck");
}

Verdict control_loop_timing() {
  Check check;
  constexpr int kSessions = 1000;
  std::size_t actuations = 0, activations = 0, reveals = 0, countdowns = 0;
  for (int i = 0; i < kSessions; ++i) {
    const GameKind game = std::array{GameKind::Godai, GameKind::Epta, GameKind::Idio}[i % 3];
    const GodaiMode mode =
        game == GameKind::Godai ? (i % 2 ? GodaiMode::BestOf5 : GodaiMode::BestOf3) : GodaiMode::FreePlay;
    const auto sound = std::array{control::SoundMode::TwoPitch, control::SoundMode::FirstPitchOnly,
                                  control::SoundMode::Off}[(i / 3) % 3];
    const std::string tag = "session " + std::to_string(i);
    sim::SessionHost host(host_options(game, mode, 5000 + i, sound));
    SessionRng fuzz = SessionRng::stream(i, 900);
    host.post(0, sim::input::Control{control::ev::StartPressed{}});
    if (fuzz.bernoulli(0.5))
      host.post(fuzz.uniform_int(0, 29'000), sim::input::Control{control::ev::SkipBreathing{}});

    // Spectators press reveal at a random moment of most interpretation windows.
    int revealed_round = 0;
    while (host.next_time() && host.now() < 4 * 3'600'000) {
      host.step();
      const auto& ctx = host.context();
      if (ctx.phase.kind == PhaseKind::InterpretWindow && ctx.round != revealed_round) {
        revealed_round = ctx.round;
        if (fuzz.bernoulli(0.7))
          host.post(host.now() + fuzz.uniform_int(0, 2'999), sim::input::Control{control::ev::RevealPressed{}});
      }
    }
    check(host.phase().kind == PhaseKind::Completed, tag + " ended in " + control::describe(host.phase()));

    const auto trace = parsed(host.transcript());
    for (const auto& e : effects(trace, "SendActuate")) {
      ++actuations;
      check(e["effect"]["duration_ms"] == 2000, tag + ": actuation of " + e["effect"]["duration_ms"].dump());
    }
    // The actuating phase itself lasts exactly the actuation time.
    TimeMs entered = -1;
    for (const auto& r : host.records()) {
      if (r.kind != RecordKind::PhaseChanged) continue;
      if (r.detail["to"] == "Actuating") entered = r.t_ms;
      if (r.detail["from"] == "Actuating") {
        check(entered >= 0 && r.t_ms - entered == 2000,
              tag + ": Actuating lasted " + std::to_string(r.t_ms - entered));
        entered = -1;
      }
    }
    // And so does every stimulation as the device ran it.
    for (const auto& a : host.activations()) {
      ++activations;
      check(a.completed && a.end && *a.end - a.start == 2000, tag + ": device activation cut short");
    }
    TimeMs shown_at = -1;
    std::vector<int> ticks;
    TimeMs last_tick_at = -1;
    for (const auto& j : trace) {
      if (j["source"] != "effect") continue;
      const auto& name = j["effect"]["effect"];
      const TimeMs t = j["t"].get<TimeMs>();
      if (name == "ShowResult") {
        ++reveals;
        check(j["effect"]["duration_ms"] == 2000, tag + ": reveal announced " + j["effect"]["duration_ms"].dump());
        shown_at = t;
      } else if (name == "HideResult") {
        check(shown_at >= 0 && t - shown_at == 2000, tag + ": reveal visible " + std::to_string(t - shown_at));
        shown_at = -1;
      } else if (name == "ShowCountdown") {
        const int tick = j["effect"]["tick"].get<int>();
        if (!ticks.empty() && ticks.back() != 1)
          check(t - last_tick_at == 1000, tag + ": countdown step of " + std::to_string(t - last_tick_at));
        ticks.push_back(tick);
        last_tick_at = t;
      }
    }
    check(shown_at < 0, tag + ": result never hidden");
    check(!ticks.empty() && ticks.size() % 3 == 0, tag + ": " + std::to_string(ticks.size()) + " countdown ticks");
    for (std::size_t k = 0; k < ticks.size(); ++k) {
      if (k % 3 == 0) ++countdowns;
      check(ticks[k] == 3 - static_cast<int>(k % 3), tag + ": countdown out of order");
    }
  }
  std::ostringstream d;
  d << kSessions << " sessions: " << actuations << " actuations, " << activations << " device activations, "
    << reveals << " reveals at 2000 ms; " << countdowns << " countdowns 3-2-1";
  return verdict(check, d.str());
}

Verdict safety_suite() {
  Check check;
  constexpr int kSessions = 1000;
  std::size_t cut = 0;
  const std::array<const char*, 4> verbs{"reveal", "pause", "resume", "skip"};
  for (int i = 0; i < kSessions; ++i) {
    SessionRng fuzz = SessionRng::stream(i, 901);
    const GameKind game = std::array{GameKind::Godai, GameKind::Epta, GameKind::Idio}[fuzz.uniform_below(3)];
    const GodaiMode mode = GodaiMode::FreePlay;
    const TimeMs kill_at = fuzz.uniform_int(0, 90'000);
    const HandSide killed = fuzz.bernoulli(0.5) ? HandSide::Left : HandSide::Right;
    std::string script = "0 start\n";
    const int noise = static_cast<int>(fuzz.uniform_int(0, 6));
    for (int k = 0; k < noise; ++k)
      script += std::to_string(fuzz.uniform_int(0, 90'000)) + " " + verbs[fuzz.uniform_below(verbs.size())] + "\n";
    script += std::to_string(kill_at) + " kill " + std::string(to_string(killed)) + "\n";

    sim::SessionHost host(host_options(game, mode, 7000 + i));
    sim::run_to_completion(host, {sim::parse_script(script), 200'000});
    const std::string tag = "session " + std::to_string(i);
    check(host.phase().kind == PhaseKind::SafeOff, tag + " ended in " + control::describe(host.phase()));

    TimeMs safe_off_at = -1;
    for (const auto& r : host.records())
      if (r.kind == RecordKind::PhaseChanged && r.detail["to"] == "SafeOff" && safe_off_at < 0) safe_off_at = r.t_ms;
    check(safe_off_at >= kill_at, tag + ": controller never reached SafeOff after the kill");
    for (const auto& a : host.activations()) {
      if (a.side == killed) {
        check(a.start < kill_at, tag + ": killed device started a channel at " + std::to_string(a.start));
        check(a.end && *a.end <= kill_at, tag + ": killed device kept a channel on past the kill");
        cut += a.end && *a.end == kill_at && !a.completed;
      }
      check(a.start <= safe_off_at, tag + ": activation after SafeOff");
    }
    for (const auto& e : effects(parsed(host.transcript()), "SendActuate"))
      check(e["t"].get<TimeMs>() < safe_off_at, tag + ": actuate sent after SafeOff");
  }

  // Usage warning: long free-play sessions, one notice exactly when a unit's
  // summed stimulation reaches 30:00.
  std::size_t usage_runs = 0;
  for (auto sound : {control::SoundMode::Off, control::SoundMode::TwoPitch}) {
    for (std::uint64_t seed : {77u, 78u}) {
      ++usage_runs;
      sim::SessionHost host(host_options(GameKind::Godai, GodaiMode::FreePlay, seed, sound));
      sim::run_to_completion(host, {{}, 3 * 3'600'000});
      const std::string tag = "usage seed " + std::to_string(seed);
      const auto notes = effects(parsed(host.transcript()), "NotifyUsageLimit");
      check(notes.size() == 1, tag + ": " + std::to_string(notes.size()) + " notices");
      check(of_kind(host.records(), RecordKind::UsageLimit).size() == 1, tag + ": UsageLimit records");
      if (notes.empty()) continue;
      const TimeMs at = notes[0]["t"].get<TimeMs>();
      std::array<TimeMs, 2> before{}, upto{};
      for (const auto& a : host.activations()) {
        const TimeMs end = a.end.value_or(host.now());
        upto[index_of(a.side)] += std::max<TimeMs>(0, std::min(end, at) - a.start);
        before[index_of(a.side)] += std::max<TimeMs>(0, std::min(end, at - 1) - a.start);
      }
      const TimeMs most = std::max(upto[0], upto[1]);
      check(most == 1'800'000, tag + ": cumulative at notice " + std::to_string(most));
      check(std::max(before[0], before[1]) < 1'800'000, tag + ": limit was reached earlier");
    }
  }
  std::ostringstream d;
  d << kSessions << " fuzzed kills: no activation after the kill (" << cut << " running channels cut); "
    << usage_runs << " long runs: one notice at 30:00";
  return verdict(check, d.str());
}

Verdict protocol_suite() {
  Check check;
  constexpr int kFrames = 100'000;
  SessionRng rng(2024);
  int identical = 0;
  for (int i = 0; i < kFrames; ++i) {
    const auto f = testing::random_frame(rng);
    const auto bytes = wire::encode(f);
    const auto r = wire::decode_stream(bytes);
    const bool ok = r.frames.size() == 1 && r.frames[0] == f && r.diagnostics.empty() && r.remainder.empty();
    identical += ok;
    check(ok, "frame " + std::to_string(i) + " " + wire::to_hex(bytes));
  }

  constexpr std::string_view kVector = "123456789";
  const auto* p = reinterpret_cast<const std::uint8_t*>(kVector.data());
  const auto crc = wire::crc16_ccitt(std::span<const std::uint8_t>(p, kVector.size()));
  check(crc == 0x29B1, "crc " + std::to_string(crc));
  check(testing::reference_crc16(p, kVector.size()) == 0x29B1, "reference crc disagrees");

  constexpr std::size_t kFuzzBytes = 1'000'000;
  SessionRng fuzz(99);
  wire::StreamDecoder dec;
  std::size_t fed = 0, crashes = 0, frames = 0, diagnostics = 0;
  while (fed < kFuzzBytes) {
    wire::Bytes chunk(std::min<std::size_t>(kFuzzBytes - fed, 1 + fuzz.uniform_below(4096)));
    for (auto& b : chunk) {
      b = static_cast<std::uint8_t>(fuzz.uniform_below(256));
      // Extra start-of-frame bytes with short lengths reach deeper paths.
      if (fuzz.uniform_below(16) == 0) b = wire::kSof;
    }
    try {
      const auto r = dec.feed(chunk);
      frames += r.frames.size();
      diagnostics += r.diagnostics.size();
    } catch (...) {
      ++crashes;
    }
    fed += chunk.size();
  }
  try {
    dec.finish();
  } catch (...) {
    ++crashes;
  }
  check(crashes == 0, std::to_string(crashes) + " decoder exceptions");
  std::ostringstream d;
  d << identical << "/" << kFrames << " round trips; crc(\"123456789\") = 0x" << std::hex << std::uppercase << crc
    << std::dec << "; " << fed << " fuzz bytes, " << crashes << " crashes, " << diagnostics << " diagnostics";
  return verdict(check, d.str());
}

Verdict determinism() {
  Check check;
  const auto dir = scratch("determinism");
  const std::string script = (dir / "script.txt").string();
  {
    std::ofstream s(script);
    s << "# pause mid-game, then reveal a few rounds\n0 start\n1200 skip\n9000 pause\n12000 resume\n"
         "25500 reveal\n40000 reveal\n";
  }
  std::size_t runs = 0;
  for (const char* game : {"godai", "epta", "idio"}) {
    for (const std::string seed : {"1", "42", "31337"}) {
      const auto a = dir / (std::string(game) + seed + "_a.jsonl");
      const auto b = dir / (std::string(game) + seed + "_b.jsonl");
      const std::string common = std::string("run --game ") + game + " --seed " + seed +
                                 (std::string(game) == "godai" ? " --mode bo5" : "") +
                                 " --script " + shell_quote(script) + " --session-id det --out ";
      check(run_cli(common + shell_quote(a.string())) == 0, std::string(game) + ": first run failed");
      check(run_cli(common + shell_quote(b.string())) == 0, std::string(game) + ": second run failed");
      const auto ba = read_file(a), bb = read_file(b);
      check(!ba.empty() && ba == bb, std::string(game) + " seed " + seed + ": logs differ");
      check(run_cli("replay --log " + shell_quote(a.string())) == 0, std::string(game) + ": replay failed");
      ++runs;
    }
  }
  // Replay has to notice a log that was not produced by its header.
  const auto a = dir / "godai1_a.jsonl";
  auto text = read_file(a);
  const auto pos = text.rfind("\"t_ms\":");
  text.insert(pos + 7, "1");
  const auto tampered = dir / "tampered.jsonl";
  std::ofstream(tampered, std::ios::binary) << text;
  check(run_cli("replay --log " + shell_quote(tampered.string())) == 1, "replay accepted a tampered log");
  return verdict(check, std::to_string(runs) + " configurations byte-identical twice over and replayed; "
                                               "tampered log rejected");
}

// Independent fold over raw log lines: nicknames from SessionStarted,
// durations from SessionEnded.
std::map<std::string, std::pair<int, TimeMs>> fold_raw(const fs::path& dir, const std::string& player) {
  std::map<std::string, std::pair<int, TimeMs>> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".jsonl" || entry.path().filename() == "index.jsonl") continue;
    std::ifstream in(entry.path());
    std::string line, game;
    bool mine = false;
    while (std::getline(in, line)) {
      const auto j = json::parse(line);
      if (j["type"] != "record") continue;
      if (j["kind"] == "SessionStarted") {
        game = j["detail"]["game"];
        mine = false;
        for (const auto& n : j["detail"]["nicknames"]) mine = mine || n == player;
      } else if (j["kind"] == "SessionEnded" && mine) {
        out[game].first += 1;
        out[game].second += j["detail"]["duration_ms"].get<TimeMs>();
      }
    }
  }
  return out;
}

Verdict statistics() {
  Check check;
  const auto dir = scratch("stats");
  constexpr int kPlays = 7;
  for (const char* game : {"godai", "epta", "idio"}) {
    for (int i = 1; i <= kPlays; ++i) {
      const std::string id = std::string(game) + "-" + std::to_string(i);
      std::string args = std::string("run --game ") + game + " --seed " + std::to_string(i * 13) +
                         " --nickname ana --session-id " + id + " --out " +
                         shell_quote((dir / (id + ".jsonl")).string());
      if (i % 2) args += " --script " + shell_quote((dir / "reveal.txt").string());
      if (i == 1) std::ofstream(dir / "reveal.txt") << "0 start\n0 skip\n7000 reveal\n";
      check(run_cli(args) == 0, id + ": run failed");
    }
  }
  // Someone else's plays must not leak into ana's numbers.
  check(run_cli("run --game epta --seed 5 --nickname bo --session-id other --out " +
                shell_quote((dir / "other.jsonl").string())) == 0,
        "other player's run failed");

  const auto reported = json::parse(cli_output("stats --player ana --log-dir " + shell_quote(dir.string())));
  const auto oracle = fold_raw(dir, "ana");
  std::ostringstream d;
  for (const char* game : {"godai", "epta", "idio"}) {
    const auto it = oracle.find(game);
    const int count = it == oracle.end() ? 0 : it->second.first;
    const TimeMs duration = it == oracle.end() ? 0 : it->second.second;
    check(reported[game]["count"] == kPlays, std::string(game) + ": count " + reported[game]["count"].dump());
    check(count == kPlays, std::string(game) + ": raw fold found " + std::to_string(count));
    check(reported[game]["duration_ms"] == duration,
          std::string(game) + ": duration " + reported[game]["duration_ms"].dump() + " vs fold " +
              std::to_string(duration));
    d << game << " " << reported[game]["count"] << "x/" << reported[game]["duration_ms"] << "ms ";
  }
  d << "(fold agrees to 0 ms)";
  return verdict(check, d.str());
}

// Upper 1% points of the chi-square distribution by degrees of freedom.
double chi2_critical_99(int df) {
  static const std::map<int, double> table{{1, 6.635}, {2, 9.210}, {3, 11.345}, {4, 13.277}};
  return table.at(df);
}

double chi2(const std::map<int, int>& counts, int categories, int n) {
  const double expected = static_cast<double>(n) / categories;
  double stat = 0;
  for (const auto& [k, c] : counts) stat += (c - expected) * (c - expected) / expected;
  // Categories never drawn contribute too.
  stat += (categories - static_cast<int>(counts.size())) * expected;
  return stat;
}

Verdict uniformity() {
  Check check;
  constexpr int kDraws = 100'000;
  std::ostringstream d;
  d.precision(3);

  auto test = [&](const std::string& label, const GameState& state, const std::vector<Gesture>& allowed,
                  std::uint64_t seed, auto category) {
    SessionRng rng(seed);
    std::map<int, int> counts;
    const std::set<Gesture> ok(allowed.begin(), allowed.end());
    for (int i = 0; i < kDraws; ++i) {
      const Gesture g = draw_gesture(rng, state);
      check(ok.count(g) > 0, label + ": drew " + std::string(to_string(g)));
      ++counts[category(g)];
    }
    const int df = static_cast<int>(allowed.size()) - 1;
    if (df == 0) {
      check(counts.size() == 1, label + ": forced draw varied");
      d << label << " forced; ";
      return;
    }
    const double stat = chi2(counts, static_cast<int>(allowed.size()), kDraws);
    check(stat < chi2_critical_99(df), label + ": chi2 " + std::to_string(stat));
    d << label << " chi2=" << stat << " (df " << df << "); ";
  };

  const std::vector<Gesture> all(kAllGestures.begin(), kAllGestures.end());
  test("godai", GodaiState{GodaiMode::FreePlay, {0, 0}, {}}, all, 1,
       [](Gesture g) { return static_cast<int>(kConfig.element_of(g)); });
  test("epta", EptaState{}, all, 2, [](Gesture g) { return kConfig.number_of(g); });
  // Ídio draws only among gestures not yet struck.
  for (std::size_t k = 0; k < kGestureCount; ++k) {
    IdioState s;
    std::vector<Gesture> remaining;
    for (std::size_t i = 0; i < kGestureCount; ++i) {
      s.struck[i] = i < k;
      if (i >= k) remaining.push_back(kAllGestures[i]);
    }
    test("idio/" + std::to_string(k) + " struck", s, remaining, 3 + k,
         [](Gesture g) { return static_cast<int>(index_of(g)); });
  }
  auto text = d.str();
  text.erase(text.find_last_not_of("; ") + 1);
  return verdict(check, text);
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"godai_golden_match", godai_golden_match},
      {"epta_golden_game", epta_golden_game},
      {"idio_golden_prefix", idio_golden_prefix},
      {"control_loop_timing", control_loop_timing},
      {"safety_suite", safety_suite},
      {"protocol_suite", protocol_suite},
      {"determinism", determinism},
      {"statistics", statistics},
      {"uniformity", uniformity},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Verdict v{false, ""};
    const auto t0 = std::chrono::steady_clock::now();
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  " << name << "  " << v.detail << "  [" << secs << " s]"
              << std::endl;
  }
  fs::remove_all(fs::temp_directory_path() / ("thea_acceptance_" + std::to_string(::getpid())));
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed ? 1 : 0;
}
