#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace thea {

// Seedable session PRNG with a pinned algorithm identity.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the C++
// standard. The std:: distributions are implementation-defined, so integer and
// real sampling are done here by hand; together this makes transcripts replay
// identically across compilers and standard libraries.
class SessionRng {
 public:
  static constexpr const char* kAlgorithm = "mt19937_64/rejection-v1";

  SessionRng() : SessionRng(0) {}
  explicit SessionRng(std::uint64_t seed) : engine_(seed) {}

  // Independent stream for a named sub-component (device, transport, ...),
  // so the draws of one component never shift another's sequence.
  static SessionRng stream(std::uint64_t seed, std::uint64_t stream_id) {
    return SessionRng(splitmix64(seed ^ splitmix64(stream_id + 0x5eed)));
  }

  std::uint64_t next_u64() {
    ++calls_;
    return engine_();
  }

  // Uniform integer in [0, bound). bound must be non-zero.
  std::uint64_t uniform_below(std::uint64_t bound) {
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - (max % bound);
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % bound;
  }

  // Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(
                    uniform_below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  // Uniform real in [0, 1) with 53 bits of resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return uniform01() < p;
  }

  std::uint64_t calls() const { return calls_; }

  friend bool operator==(const SessionRng& a, const SessionRng& b) {
    return a.engine_ == b.engine_;
  }

  static constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

 private:
  std::mt19937_64 engine_;
  std::uint64_t calls_ = 0;
};

// Stream ids used by the session host.
namespace rng_stream {
inline constexpr std::uint64_t kGame = 1;
inline constexpr std::uint64_t kDeviceBase = 100;
inline constexpr std::uint64_t kTransportBase = 200;
}  // namespace rng_stream

}  // namespace thea
