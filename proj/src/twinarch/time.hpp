#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace twinarch {

using Millis = std::chrono::milliseconds;
using TimePoint = std::chrono::sys_time<Millis>;

/// Parses an RFC 3339 timestamp. A zone designator (`Z` or `±hh:mm`) is
/// mandatory; fractional seconds are truncated to milliseconds.
std::optional<TimePoint> parse_rfc3339(std::string_view text);

/// UTC rendering, `YYYY-MM-DDThh:mm:ssZ`, with `.mmm` only when the
/// millisecond part is non-zero.
std::string format_rfc3339(TimePoint t);

inline TimePoint from_millis(std::int64_t ms) { return TimePoint{Millis{ms}}; }
inline std::int64_t to_millis(TimePoint t) { return t.time_since_epoch().count(); }
inline TimePoint add_seconds(TimePoint t, double seconds) {
  return t + Millis{static_cast<std::int64_t>(seconds * 1000.0)};
}

// Simulated time shared by the components of one run. Never reads the wall clock.
class LogicalClock {
 public:
  explicit LogicalClock(TimePoint start = TimePoint{}) : ms_(to_millis(start)) {}

  TimePoint now() const noexcept { return from_millis(ms_.load(std::memory_order_acquire)); }
  void set(TimePoint t) noexcept { ms_.store(to_millis(t), std::memory_order_release); }
  void advance(Millis d) noexcept { ms_.fetch_add(d.count(), std::memory_order_acq_rel); }

 private:
  std::atomic<std::int64_t> ms_;
};

}  // namespace twinarch
