#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "thea/clock.hpp"
#include "thea/error.hpp"
#include "thea/rng.hpp"
#include "thea/wire_protocol.hpp"

namespace thea::wire {

struct TransportParams {
  TimeMs latency_min_ms = 0;
  TimeMs latency_max_ms = 0;  // equal to min for a fixed latency
  double drop_prob = 0.0;
  double duplicate_prob = 0.0;

  static TransportParams fixed(TimeMs latency, double drop = 0.0) {
    return {latency, latency, drop, 0.0};
  }
  static TransportParams uniform(TimeMs lo, TimeMs hi, double drop = 0.0) {
    return {lo, hi, drop, 0.0};
  }

  friend bool operator==(const TransportParams&, const TransportParams&) = default;
};

inline void validate(const TransportParams& t) {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(t.drop_prob) || !prob(t.duplicate_prob))
    throw Error(ErrorCode::InvalidConfig, "transport probabilities must lie in [0,1]");
  if (t.latency_min_ms < 0 || t.latency_max_ms < t.latency_min_ms)
    throw Error(ErrorCode::InvalidConfig, "transport latency range is invalid");
}

struct Delivery {
  TimeMs at = 0;
  Bytes bytes;
  std::optional<TimeMs> duplicate_at;
};

// Samples one send. Draw order is fixed (drop, latency, duplicate, duplicate
// latency) so a seed fully determines the outcome.
inline std::optional<Delivery> transport_send(const TransportParams& t, const Frame& f, TimeMs now,
                                              SessionRng& rng) {
  auto latency = [&] {
    if (t.latency_max_ms == t.latency_min_ms) return t.latency_min_ms;
    return rng.uniform_int(t.latency_min_ms, t.latency_max_ms);
  };
  if (rng.bernoulli(t.drop_prob)) return std::nullopt;
  Delivery d{now + latency(), encode(f), std::nullopt};
  if (rng.bernoulli(t.duplicate_prob)) d.duplicate_at = now + latency();
  return d;
}

// One direction of a simulated link: a time-ordered queue of encoded frames.
// Frames due at the same instant come out in send order.
class SimTransport {
 public:
  SimTransport(TransportParams params, SessionRng rng) : params_(params), rng_(std::move(rng)) {
    validate(params_);
  }

  // Returns false when the frame was dropped.
  bool send(const Frame& f, TimeMs now) {
    ++sent_;
    auto d = transport_send(params_, f, now, rng_);
    if (!d) {
      ++dropped_;
      return false;
    }
    if (d->duplicate_at) queue_.push({*d->duplicate_at, seq_++, d->bytes});
    queue_.push({d->at, seq_++, std::move(d->bytes)});
    return true;
  }

  std::optional<TimeMs> next_due() const {
    if (queue_.empty()) return std::nullopt;
    return queue_.top().at;
  }

  struct Arrival {
    TimeMs at;
    Bytes bytes;
  };

  std::vector<Arrival> pop_due(TimeMs now) {
    std::vector<Arrival> out;
    while (!queue_.empty() && queue_.top().at <= now) {
      out.push_back({queue_.top().at, queue_.top().bytes});
      queue_.pop();
    }
    return out;
  }

  std::size_t sent() const { return sent_; }
  std::size_t dropped() const { return dropped_; }
  const TransportParams& params() const { return params_; }

 private:
  struct Entry {
    TimeMs at;
    std::uint64_t seq;
    Bytes bytes;
    bool operator>(const Entry& o) const { return at != o.at ? at > o.at : seq > o.seq; }
  };

  TransportParams params_;
  SessionRng rng_;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue_;
  std::uint64_t seq_ = 0;
  std::size_t sent_ = 0;
  std::size_t dropped_ = 0;
};

inline nlohmann::json to_json(const TransportParams& t) {
  return {{"latency_ms", {{"min", t.latency_min_ms}, {"max", t.latency_max_ms}}},
          {"drop_prob", t.drop_prob},
          {"duplicate_prob", t.duplicate_prob}};
}

// Accepts {"latency_ms": 5} or {"latency_ms": {"min": 2, "max": 8}}.
inline TransportParams transport_from_json(const nlohmann::json& j) {
  TransportParams t;
  try {
    if (j.contains("latency_ms")) {
      const auto& l = j.at("latency_ms");
      if (l.is_number()) {
        t.latency_min_ms = t.latency_max_ms = l.get<TimeMs>();
      } else {
        t.latency_min_ms = l.at("min").get<TimeMs>();
        t.latency_max_ms = l.at("max").get<TimeMs>();
      }
    }
    t.drop_prob = j.value("drop_prob", 0.0);
    t.duplicate_prob = j.value("duplicate_prob", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("transport: ") + e.what());
  }
  validate(t);
  return t;
}

// ---------------------------------------------------------------------------
// Capture files: one line per frame on the wire,
//   <t_ms> <down|up> <device-id> <hex bytes>
// "down" is controller -> device, "up" is device -> controller.

struct CaptureLine {
  TimeMs t_ms = 0;
  std::string direction;
  std::string device;
  Bytes bytes;
  friend bool operator==(const CaptureLine&, const CaptureLine&) = default;
};

inline std::string format_capture_line(const CaptureLine& c) {
  return std::to_string(c.t_ms) + " " + c.direction + " " + c.device + " " + to_hex(c.bytes);
}

inline CaptureLine parse_capture_line(const std::string& line) {
  std::istringstream in(line);
  CaptureLine c;
  std::string hex;
  if (!(in >> c.t_ms >> c.direction >> c.device >> hex) ||
      (c.direction != "down" && c.direction != "up"))
    throw Error(ErrorCode::LogFormat, "bad capture line: " + line);
  auto bytes = from_hex(hex);
  if (!bytes) throw Error(ErrorCode::LogFormat, "bad hex in capture line: " + line);
  c.bytes = std::move(*bytes);
  return c;
}

inline std::vector<CaptureLine> read_capture(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::LogFormat, "cannot open " + path);
  std::vector<CaptureLine> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') out.push_back(parse_capture_line(line));
  return out;
}

}  // namespace thea::wire
