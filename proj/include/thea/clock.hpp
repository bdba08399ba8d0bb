#pragma once

#include <chrono>
#include <cstdint>

namespace thea {

// Milliseconds on the session clock: virtual in tests and headless runs,
// wall-clock (since service start) in live mode.
using TimeMs = std::int64_t;

class Clock {
 public:
  virtual ~Clock() = default;
  virtual TimeMs now() const = 0;
};

class VirtualClock final : public Clock {
 public:
  TimeMs now() const override { return now_; }
  void advance_to(TimeMs t) {
    if (t > now_) now_ = t;
  }

 private:
  TimeMs now_ = 0;
};

class WallClock final : public Clock {
 public:
  WallClock() : start_(std::chrono::steady_clock::now()) {}
  TimeMs now() const override {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace thea
