#pragma once

// Framed binary protocol between the session controller and the
// microcontroller simulators.
//
//   offset  size  field
//   0       1     SOF, always 0xA5
//   1       1     version, always 0x01
//   2       1     kind
//   3       1     payload length N (0..255)
//   4       N     payload, multi-byte fields little-endian
//   4+N     2     CRC-16/CCITT (poly 0x1021, init 0xFFFF) over bytes 1..3+N,
//                 little-endian
//
// See docs/protocol.md for the per-kind payload tables.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "thea/error.hpp"
#include "thea/gesture.hpp"

namespace thea::wire {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::uint8_t kSof = 0xA5;
inline constexpr std::uint8_t kVersion = 0x01;
inline constexpr std::size_t kHeaderSize = 4;
inline constexpr std::size_t kCrcSize = 2;
inline constexpr std::size_t kOverhead = kHeaderSize + kCrcSize;
inline constexpr std::uint16_t kMaxActuationMs = 2000;
inline constexpr std::uint16_t kFidelityScale = 10000;  // basis points

enum class Kind : std::uint8_t {
  Actuate = 0x01,
  StopAll = 0x02,
  StatusReq = 0x03,
  StatusResp = 0x04,
  EventKill = 0x05,
  Ping = 0x06,
  Pong = 0x07,
  CalibrateSet = 0x08,
  ActuationDone = 0x09,
};

constexpr std::string_view to_string(Kind k) {
  switch (k) {
    case Kind::Actuate: return "ACTUATE";
    case Kind::StopAll: return "STOP_ALL";
    case Kind::StatusReq: return "STATUS_REQ";
    case Kind::StatusResp: return "STATUS_RESP";
    case Kind::EventKill: return "EVENT_KILL";
    case Kind::Ping: return "PING";
    case Kind::Pong: return "PONG";
    case Kind::CalibrateSet: return "CALIBRATE_SET";
    case Kind::ActuationDone: return "ACTUATION_DONE";
  }
  return "?";
}

struct Actuate {
  std::uint8_t channel = 1;
  std::uint16_t duration_ms = 0;
  friend bool operator==(const Actuate&, const Actuate&) = default;
};
struct StopAll {
  friend bool operator==(const StopAll&, const StopAll&) = default;
};
struct StatusReq {
  friend bool operator==(const StatusReq&, const StatusReq&) = default;
};
struct StatusResp {
  bool kill_switch_on = false;
  std::uint8_t intensity = 1;
  std::uint8_t active_channel = 0;  // 0 = none
  std::uint8_t calibrated_mask = 0;  // bit k-1 set = channel k calibrated
  std::uint32_t cumulative_on_ms = 0;
  friend bool operator==(const StatusResp&, const StatusResp&) = default;
};
struct EventKill {
  bool engaged = true;
  friend bool operator==(const EventKill&, const EventKill&) = default;
};
struct Ping {
  friend bool operator==(const Ping&, const Ping&) = default;
};
struct Pong {
  friend bool operator==(const Pong&, const Pong&) = default;
};
struct CalibrateSet {
  std::uint8_t channel = 1;
  std::uint16_t fidelity_bp = 0;
  friend bool operator==(const CalibrateSet&, const CalibrateSet&) = default;
};
struct ActuationDone {
  std::uint8_t channel = 1;
  Completeness completeness = Completeness::Complete;
  std::uint16_t active_ms = 0;
  friend bool operator==(const ActuationDone&, const ActuationDone&) = default;
};

// Alternative index + 1 == wire kind.
using Payload = std::variant<Actuate, StopAll, StatusReq, StatusResp, EventKill, Ping, Pong,
                             CalibrateSet, ActuationDone>;

struct Frame {
  Payload payload;

  Kind kind() const { return static_cast<Kind>(payload.index() + 1); }
  friend bool operator==(const Frame&, const Frame&) = default;
};

// ---------------------------------------------------------------------------
// CRC-16/CCITT-FALSE

namespace detail {
constexpr std::array<std::uint16_t, 256> make_crc_table() {
  std::array<std::uint16_t, 256> table{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint16_t crc = static_cast<std::uint16_t>(i << 8);
    for (int bit = 0; bit < 8; ++bit)
      crc = static_cast<std::uint16_t>((crc & 0x8000) ? (crc << 1) ^ 0x1021 : crc << 1);
    table[i] = crc;
  }
  return table;
}
inline constexpr auto kCrcTable = make_crc_table();
}  // namespace detail

constexpr std::uint16_t crc16_ccitt(std::span<const std::uint8_t> data) {
  std::uint16_t crc = 0xFFFF;
  for (std::uint8_t b : data)
    crc = static_cast<std::uint16_t>((crc << 8) ^ detail::kCrcTable[((crc >> 8) ^ b) & 0xFF]);
  return crc;
}

// ---------------------------------------------------------------------------
// Encoding

namespace detail {
inline void put_u16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
inline void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}
inline std::uint16_t get_u16(std::span<const std::uint8_t> p, std::size_t at) {
  return static_cast<std::uint16_t>(p[at] | (p[at + 1] << 8));
}
inline std::uint32_t get_u32(std::span<const std::uint8_t> p, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[at + i]) << (8 * i);
  return v;
}

struct PayloadWriter {
  Bytes& out;
  void operator()(const Actuate& a) const {
    out.push_back(a.channel);
    put_u16(out, a.duration_ms);
  }
  void operator()(const StopAll&) const {}
  void operator()(const StatusReq&) const {}
  void operator()(const StatusResp& s) const {
    out.push_back(s.kill_switch_on ? 1 : 0);
    out.push_back(s.intensity);
    out.push_back(s.active_channel);
    out.push_back(s.calibrated_mask);
    put_u32(out, s.cumulative_on_ms);
  }
  void operator()(const EventKill& e) const { out.push_back(e.engaged ? 1 : 0); }
  void operator()(const Ping&) const {}
  void operator()(const Pong&) const {}
  void operator()(const CalibrateSet& c) const {
    out.push_back(c.channel);
    put_u16(out, c.fidelity_bp);
  }
  void operator()(const ActuationDone& d) const {
    out.push_back(d.channel);
    out.push_back(static_cast<std::uint8_t>(d.completeness));
    put_u16(out, d.active_ms);
  }
};

inline bool valid_channel(std::uint8_t ch) { return ch >= 1 && ch <= 4; }
}  // namespace detail

// Empty string when the frame satisfies its kind's invariants.
inline std::string frame_violation(const Frame& f) {
  if (const auto* a = std::get_if<Actuate>(&f.payload)) {
    if (!detail::valid_channel(a->channel)) return "ACTUATE channel must be 1..4";
    if (a->duration_ms > kMaxActuationMs) return "ACTUATE duration exceeds 2000 ms";
  }
  if (const auto* c = std::get_if<CalibrateSet>(&f.payload)) {
    if (!detail::valid_channel(c->channel)) return "CALIBRATE_SET channel must be 1..4";
    if (c->fidelity_bp > kFidelityScale) return "CALIBRATE_SET fidelity exceeds 10000";
  }
  if (const auto* d = std::get_if<ActuationDone>(&f.payload)) {
    if (!detail::valid_channel(d->channel)) return "ACTUATION_DONE channel must be 1..4";
    if (d->completeness == Completeness::Unknown) return "ACTUATION_DONE completeness invalid";
  }
  if (const auto* s = std::get_if<StatusResp>(&f.payload)) {
    if (s->active_channel > 4) return "STATUS_RESP active channel must be 0..4";
    if (s->calibrated_mask > 0x0F) return "STATUS_RESP calibrated mask uses 4 bits";
  }
  return {};
}

// Low-level framing for an arbitrary kind byte and payload.
inline Bytes encode_raw(std::uint8_t kind, std::span<const std::uint8_t> payload) {
  if (payload.size() > 255)
    throw Error(ErrorCode::PayloadTooLarge,
                "payload of " + std::to_string(payload.size()) + " bytes");
  Bytes out;
  out.reserve(kOverhead + payload.size());
  out.push_back(kSof);
  out.push_back(kVersion);
  out.push_back(kind);
  out.push_back(static_cast<std::uint8_t>(payload.size()));
  out.insert(out.end(), payload.begin(), payload.end());
  const auto crc = crc16_ccitt(std::span<const std::uint8_t>(out).subspan(1));
  detail::put_u16(out, crc);
  return out;
}

// Throws InvalidFrame for frames the controller must never send, including any
// ACTUATE longer than the 2000 ms safety ceiling.
inline Bytes encode(const Frame& f) {
  if (auto why = frame_violation(f); !why.empty()) throw Error(ErrorCode::InvalidFrame, why);
  Bytes payload;
  std::visit(detail::PayloadWriter{payload}, f.payload);
  return encode_raw(static_cast<std::uint8_t>(f.kind()), payload);
}

// ---------------------------------------------------------------------------
// Stream decoding

enum class DiagnosticKind : std::uint8_t {
  BadCrc,
  UnknownKind,
  Truncated,
  BadPayload,
  UnsupportedVersion,
};

constexpr std::string_view to_string(DiagnosticKind d) {
  switch (d) {
    case DiagnosticKind::BadCrc: return "BadCrc";
    case DiagnosticKind::UnknownKind: return "UnknownKind";
    case DiagnosticKind::Truncated: return "Truncated";
    case DiagnosticKind::BadPayload: return "BadPayload";
    case DiagnosticKind::UnsupportedVersion: return "UnsupportedVersion";
  }
  return "?";
}

struct Diagnostic {
  DiagnosticKind kind;
  std::size_t offset;  // position of the offending SOF in the input
  friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

struct DecodeResult {
  std::vector<Frame> frames;
  std::vector<Diagnostic> diagnostics;
  Bytes remainder;  // an incomplete trailing frame, starting at its SOF
  std::size_t skipped_bytes = 0;

  std::size_t count(DiagnosticKind k) const {
    std::size_t n = 0;
    for (const auto& d : diagnostics) n += d.kind == k;
    return n;
  }
};

// Parses a CRC-checked payload for a known kind; nullopt when the length or a
// field value is out of range for that kind.
inline std::optional<Frame> parse_payload(Kind kind, std::span<const std::uint8_t> p) {
  using detail::get_u16;
  using detail::get_u32;
  auto sized = [&](std::size_t n) { return p.size() == n; };
  std::optional<Frame> f;
  switch (kind) {
    case Kind::Actuate:
      if (sized(3)) f = Frame{Actuate{p[0], get_u16(p, 1)}};
      break;
    case Kind::StopAll:
      if (sized(0)) f = Frame{StopAll{}};
      break;
    case Kind::StatusReq:
      if (sized(0)) f = Frame{StatusReq{}};
      break;
    case Kind::StatusResp:
      if (sized(8) && p[0] <= 1) f = Frame{StatusResp{p[0] == 1, p[1], p[2], p[3], get_u32(p, 4)}};
      break;
    case Kind::EventKill:
      if (sized(1) && p[0] <= 1) f = Frame{EventKill{p[0] == 1}};
      break;
    case Kind::Ping:
      if (sized(0)) f = Frame{Ping{}};
      break;
    case Kind::Pong:
      if (sized(0)) f = Frame{Pong{}};
      break;
    case Kind::CalibrateSet:
      if (sized(3)) f = Frame{CalibrateSet{p[0], get_u16(p, 1)}};
      break;
    case Kind::ActuationDone:
      if (sized(4) && p[1] <= 2)
        f = Frame{ActuationDone{p[0], static_cast<Completeness>(p[1]), get_u16(p, 2)}};
      break;
  }
  if (f && !frame_violation(*f).empty()) return std::nullopt;
  return f;
}

// Never throws on input content. Resynchronises on the next SOF after any
// corruption; frames failing the CRC are counted and dropped. With
// flush = true a partial frame is reported as Truncated and scanning continues
// past it, instead of the tail being returned as remainder.
inline DecodeResult decode_stream(std::span<const std::uint8_t> buf, bool flush = false) {
  DecodeResult r;
  std::size_t i = 0;
  while (i < buf.size()) {
    if (buf[i] != kSof) {
      ++r.skipped_bytes;
      ++i;
      continue;
    }
    const std::size_t avail = buf.size() - i;
    if (avail < kHeaderSize || avail < kOverhead + buf[i + 3]) {
      if (!flush) {
        r.remainder.assign(buf.begin() + static_cast<std::ptrdiff_t>(i), buf.end());
        break;
      }
      // No more bytes are coming, so this SOF may have been noise in front of
      // a complete frame.
      r.diagnostics.push_back({DiagnosticKind::Truncated, i});
      ++i;
      continue;
    }
    const std::size_t len = buf[i + 3];
    const auto covered = buf.subspan(i + 1, 3 + len);
    const std::uint16_t wire_crc = detail::get_u16(buf, i + kHeaderSize + len);
    if (crc16_ccitt(covered) != wire_crc) {
      r.diagnostics.push_back({DiagnosticKind::BadCrc, i});
      ++i;
      continue;
    }
    const std::size_t total = kOverhead + len;
    const std::uint8_t version = buf[i + 1];
    const std::uint8_t kind = buf[i + 2];
    if (version != kVersion) {
      r.diagnostics.push_back({DiagnosticKind::UnsupportedVersion, i});
    } else if (kind < 0x01 || kind > 0x09) {
      r.diagnostics.push_back({DiagnosticKind::UnknownKind, i});
    } else if (auto f = parse_payload(static_cast<Kind>(kind), buf.subspan(i + kHeaderSize, len))) {
      r.frames.push_back(std::move(*f));
    } else {
      r.diagnostics.push_back({DiagnosticKind::BadPayload, i});
    }
    i += total;
  }
  return r;
}

// Incremental decoder for one direction of a byte stream.
class StreamDecoder {
 public:
  DecodeResult feed(std::span<const std::uint8_t> bytes) {
    pending_.insert(pending_.end(), bytes.begin(), bytes.end());
    auto r = decode_stream(pending_);
    pending_ = std::move(r.remainder);
    r.remainder.clear();
    return r;
  }

  DecodeResult finish() {
    auto r = decode_stream(pending_, /*flush=*/true);
    pending_.clear();
    return r;
  }

  std::size_t pending() const { return pending_.size(); }

 private:
  Bytes pending_;
};

// ---------------------------------------------------------------------------
// Hex helpers used by capture files

inline std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    s.push_back(kDigits[b >> 4]);
    s.push_back(kDigits[b & 0xF]);
  }
  return s;
}

inline std::optional<Bytes> from_hex(std::string_view s) {
  if (s.size() % 2 != 0) return std::nullopt;
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  Bytes out;
  for (std::size_t i = 0; i < s.size(); i += 2) {
    const int hi = nibble(s[i]);
    const int lo = nibble(s[i + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    out.push_back(static_cast<std::uint8_t>((hi << 4) | lo));
  }
  return out;
}

}  // namespace thea::wire
