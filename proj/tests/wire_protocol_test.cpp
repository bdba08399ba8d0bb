#include "thea/transport.hpp"
#include "thea/wire_protocol.hpp"

#include <string_view>

#include "gtest/gtest.h"
#include "wire_gen.hpp"

namespace thea::wire {
namespace {

using thea::testing::random_frame;
using thea::testing::reference_crc16;

Bytes garbage(SessionRng& rng, std::size_t n, bool allow_sof) {
  Bytes out;
  while (out.size() < n) {
    auto b = static_cast<std::uint8_t>(rng.uniform_below(256));
    if (!allow_sof && b == kSof) continue;
    out.push_back(b);
  }
  return out;
}

TEST(CrcTest, check_vector) {
  constexpr std::string_view kCheck = "123456789";
  const auto* p = reinterpret_cast<const std::uint8_t*>(kCheck.data());
  EXPECT_EQ(reference_crc16(p, kCheck.size()), 0x29B1);
  EXPECT_EQ(crc16_ccitt(std::span<const std::uint8_t>(p, kCheck.size())), 0x29B1);
}

TEST(CrcTest, table_matches_bitwise_reference) {
  SessionRng rng(3);
  for (int i = 0; i < 2000; ++i) {
    const auto data = garbage(rng, rng.uniform_below(64), true);
    ASSERT_EQ(crc16_ccitt(data), reference_crc16(data.data(), data.size()));
  }
}

TEST(EncodeTest, layout_of_actuate) {
  const auto bytes = encode(Frame{Actuate{2, 2000}});
  ASSERT_EQ(bytes.size(), 9u);
  EXPECT_EQ(bytes[0], 0xA5);
  EXPECT_EQ(bytes[1], 0x01);
  EXPECT_EQ(bytes[2], 0x01);
  EXPECT_EQ(bytes[3], 3);
  EXPECT_EQ(bytes[4], 2);
  EXPECT_EQ(bytes[5], 0xD0);  // 2000 = 0x07D0, little-endian
  EXPECT_EQ(bytes[6], 0x07);
  const auto crc = reference_crc16(bytes.data() + 1, 6);
  EXPECT_EQ(bytes[7], crc & 0xFF);
  EXPECT_EQ(bytes[8], crc >> 8);
}

TEST(EncodeTest, ping_is_header_plus_crc) {
  EXPECT_EQ(encode(Frame{Ping{}}).size(), 6u);
  EXPECT_EQ(encode(Frame{StopAll{}}).size(), kOverhead);
}

TEST(EncodeTest, safety_ceiling_and_bad_channels_rejected) {
  try {
    encode(Frame{Actuate{1, 2001}});
    FAIL() << "expected InvalidFrame";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidFrame);
  }
  EXPECT_THROW(encode(Frame{Actuate{0, 100}}), Error);
  EXPECT_THROW(encode(Frame{Actuate{5, 100}}), Error);
  EXPECT_THROW(encode(Frame{CalibrateSet{1, 10001}}), Error);
  EXPECT_NO_THROW(encode(Frame{Actuate{4, 2000}}));
}

TEST(EncodeTest, payload_too_large) {
  const Bytes big(256, 0);
  try {
    encode_raw(0x01, big);
    FAIL() << "expected PayloadTooLarge";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PayloadTooLarge);
  }
  EXPECT_EQ(encode_raw(0x01, Bytes(255, 0)).size(), 261u);
}

TEST(DecodeTest, empty_input) {
  const auto r = decode_stream({});
  EXPECT_TRUE(r.frames.empty());
  EXPECT_TRUE(r.diagnostics.empty());
  EXPECT_TRUE(r.remainder.empty());
}

TEST(DecodeTest, property_decode_of_encode_is_identity) {
  SessionRng rng(11);
  for (int i = 0; i < 20'000; ++i) {
    const auto f = random_frame(rng);
    const auto bytes = encode(f);
    const auto r = decode_stream(bytes);
    ASSERT_EQ(r.frames.size(), 1u);
    ASSERT_EQ(r.frames[0], f);
    ASSERT_TRUE(r.diagnostics.empty());
    ASSERT_EQ(encode(r.frames[0]), bytes);
  }
}

TEST(DecodeTest, resyncs_through_garbage) {
  SessionRng rng(12);
  for (int i = 0; i < 2000; ++i) {
    const auto f = random_frame(rng);
    Bytes stream = garbage(rng, rng.uniform_below(40), false);
    const auto body = encode(f);
    stream.insert(stream.end(), body.begin(), body.end());
    const auto tail = garbage(rng, rng.uniform_below(40), false);
    stream.insert(stream.end(), tail.begin(), tail.end());
    const auto r = decode_stream(stream, true);
    ASSERT_EQ(r.frames.size(), 1u);
    ASSERT_EQ(r.frames[0], f);
  }
}

TEST(DecodeTest, frame_survives_arbitrary_prefix_garbage) {
  // Garbage may contain SOF bytes that start fake frames; those fail the CRC
  // and the decoder walks forward until it finds the real one.
  SessionRng rng(13);
  int found = 0;
  constexpr int kTrials = 2000;
  for (int i = 0; i < kTrials; ++i) {
    const auto f = random_frame(rng);
    Bytes stream = garbage(rng, 1 + rng.uniform_below(300), true);
    const auto body = encode(f);
    stream.insert(stream.end(), body.begin(), body.end());
    const auto r = decode_stream(stream, true);
    found += !r.frames.empty() && r.frames.back() == f;
  }
  EXPECT_EQ(found, kTrials);
}

TEST(DecodeTest, every_single_bit_flip_is_caught) {
  const auto clean = encode(Frame{Actuate{2, 2000}});
  // Everything the CRC covers except the length byte, plus the CRC itself.
  for (std::size_t byte = 1; byte < clean.size(); ++byte) {
    if (byte == 3) continue;
    for (int bit = 0; bit < 8; ++bit) {
      auto bytes = clean;
      bytes[byte] ^= static_cast<std::uint8_t>(1u << bit);
      const auto r = decode_stream(bytes);
      ASSERT_TRUE(r.frames.empty()) << "byte " << byte << " bit " << bit;
      ASSERT_EQ(r.count(DiagnosticKind::BadCrc), 1u) << "byte " << byte << " bit " << bit;
    }
  }
}

TEST(DecodeTest, unknown_kind_and_bad_payload_are_diagnosed) {
  auto r = decode_stream(encode_raw(0x20, Bytes{}));
  EXPECT_TRUE(r.frames.empty());
  EXPECT_EQ(r.count(DiagnosticKind::UnknownKind), 1u);

  // Valid CRC but a 2-byte ACTUATE payload.
  r = decode_stream(encode_raw(0x01, Bytes{1, 2}));
  EXPECT_EQ(r.count(DiagnosticKind::BadPayload), 1u);

  // ACTUATE beyond the duration ceiling never decodes.
  r = decode_stream(encode_raw(0x01, Bytes{1, 0xD1, 0x07}));
  EXPECT_TRUE(r.frames.empty());
  EXPECT_EQ(r.count(DiagnosticKind::BadPayload), 1u);

  auto v2 = encode(Frame{Ping{}});
  v2[1] = 0x02;
  const auto crc = crc16_ccitt(std::span<const std::uint8_t>(v2).subspan(1, 3));
  v2[4] = crc & 0xFF;
  v2[5] = crc >> 8;
  r = decode_stream(v2);
  EXPECT_EQ(r.count(DiagnosticKind::UnsupportedVersion), 1u);
}

TEST(DecodeTest, truncated_tail_is_remainder_until_flushed) {
  const auto body = encode(Frame{Actuate{1, 500}});
  const Bytes partial(body.begin(), body.end() - 2);
  auto r = decode_stream(partial);
  EXPECT_TRUE(r.frames.empty());
  EXPECT_TRUE(r.diagnostics.empty());
  EXPECT_EQ(r.remainder, partial);

  r = decode_stream(partial, true);
  EXPECT_EQ(r.count(DiagnosticKind::Truncated), 1u);
  EXPECT_TRUE(r.remainder.empty());
}

TEST(DecodeTest, incremental_feeding_matches_whole_buffer) {
  SessionRng rng(14);
  Bytes stream;
  std::vector<Frame> sent;
  for (int i = 0; i < 200; ++i) {
    sent.push_back(random_frame(rng));
    const auto b = encode(sent.back());
    stream.insert(stream.end(), b.begin(), b.end());
  }
  StreamDecoder dec;
  std::vector<Frame> got;
  std::size_t at = 0;
  while (at < stream.size()) {
    const auto n = std::min<std::size_t>(1 + rng.uniform_below(17), stream.size() - at);
    auto r = dec.feed(std::span<const std::uint8_t>(stream).subspan(at, n));
    got.insert(got.end(), r.frames.begin(), r.frames.end());
    at += n;
  }
  EXPECT_EQ(dec.finish().diagnostics.size(), 0u);
  EXPECT_EQ(got, sent);
}

TEST(DecodeTest, fuzz_never_throws) {
  SessionRng rng(15);
  StreamDecoder dec;
  std::size_t frames = 0;
  for (int chunk = 0; chunk < 1000; ++chunk) {
    Bytes b = garbage(rng, 100, true);
    // Sprinkle SOFs with small lengths so the framing paths get exercised.
    for (std::size_t k = 0; k + 3 < b.size(); k += 13) {
      b[k] = kSof;
      b[k + 3] = static_cast<std::uint8_t>(rng.uniform_below(8));
    }
    ASSERT_NO_THROW(frames += dec.feed(b).frames.size());
  }
  ASSERT_NO_THROW(dec.finish());
  EXPECT_LT(frames, 10u);
}

TEST(TransportTest, fixed_latency_delivers_everything_on_time) {
  SessionRng rng(1);
  const auto t = TransportParams::fixed(5);
  for (TimeMs now = 0; now < 1000; now += 7) {
    const auto d = transport_send(t, Frame{Ping{}}, now, rng);
    ASSERT_TRUE(d.has_value());
    EXPECT_EQ(d->at, now + 5);
    EXPECT_EQ(d->bytes, encode(Frame{Ping{}}));
    EXPECT_FALSE(d->duplicate_at.has_value());
  }
}

TEST(TransportTest, certain_drop_delivers_nothing) {
  SessionRng rng(1);
  const auto t = TransportParams::fixed(5, 1.0);
  for (int i = 0; i < 1000; ++i) EXPECT_FALSE(transport_send(t, Frame{Ping{}}, i, rng));
}

TEST(TransportTest, drop_rate_matches_monte_carlo) {
  SessionRng rng(2);
  const auto t = TransportParams::uniform(2, 9, 0.1);
  int delivered = 0;
  for (int i = 0; i < 10'000; ++i) {
    if (auto d = transport_send(t, Frame{Ping{}}, 100, rng)) {
      ++delivered;
      ASSERT_GE(d->at, 102);
      ASSERT_LE(d->at, 109);
    }
  }
  EXPECT_NEAR(delivered / 10'000.0, 0.9, 0.015);
}

TEST(TransportTest, same_seed_same_samples) {
  const auto t = TransportParams{1, 50, 0.3, 0.2};
  SessionRng a(77), b(77);
  for (int i = 0; i < 500; ++i) {
    const auto x = transport_send(t, Frame{Ping{}}, i, a);
    const auto y = transport_send(t, Frame{Ping{}}, i, b);
    ASSERT_EQ(x.has_value(), y.has_value());
    if (x) {
      ASSERT_EQ(x->at, y->at);
      ASSERT_EQ(x->duplicate_at, y->duplicate_at);
    }
  }
}

TEST(TransportTest, queue_orders_by_time_then_send_order) {
  SimTransport link(TransportParams::fixed(10), SessionRng(1));
  link.send(Frame{Ping{}}, 0);
  link.send(Frame{Pong{}}, 0);
  link.send(Frame{StopAll{}}, 5);
  EXPECT_EQ(link.next_due(), 10);
  auto due = link.pop_due(10);
  ASSERT_EQ(due.size(), 2u);
  EXPECT_EQ(decode_stream(due[0].bytes).frames[0], Frame{Ping{}});
  EXPECT_EQ(decode_stream(due[1].bytes).frames[0], Frame{Pong{}});
  EXPECT_EQ(link.next_due(), 15);
}

TEST(TransportTest, probabilities_validated) {
  EXPECT_THROW(validate(TransportParams{0, 0, 1.5, 0}), Error);
  EXPECT_THROW(validate(TransportParams{0, 0, 0, -0.1}), Error);
  EXPECT_THROW(validate(TransportParams{5, 1, 0, 0}), Error);
  EXPECT_EQ(transport_from_json(nlohmann::json::parse(R"({"latency_ms": {"min": 2, "max": 8}})")),
            (TransportParams{2, 8, 0, 0}));
}

TEST(CaptureTest, line_round_trip) {
  const CaptureLine c{2000, "up", "right", encode(Frame{ActuationDone{2, Completeness::Partial, 2000}})};
  const auto line = format_capture_line(c);
  EXPECT_EQ(parse_capture_line(line), c);
  EXPECT_THROW(parse_capture_line("12 sideways x a5"), Error);
  EXPECT_THROW(parse_capture_line("12 up x a5z"), Error);
}

}  // namespace
}  // namespace thea::wire
