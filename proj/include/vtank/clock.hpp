#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>

namespace vtank {

using Millis = std::int64_t;

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Millis now_ms() const = 0;
};

class SystemClock final : public Clock {
 public:
  Millis now_ms() const override {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
  }
};

/// Test clock; only moves when told to.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(Millis start = 1'700'000'000'000) : now_(start) {}
  Millis now_ms() const override { return now_.load(); }
  void advance_ms(Millis d) { now_ += d; }
  void set_ms(Millis t) { now_ = t; }

 private:
  std::atomic<Millis> now_;
};

}  // namespace vtank
