#pragma once

#include "fleetwarden/core/clock.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fleetwarden {

/// Weekly set of [start, end) local-time intervals.
///
/// Grammar: comma- or newline-separated items `<DayRange> <HH:MM>-<HH:MM>`,
/// where DayRange is `Mon` or an inclusive range such as `Mon-Fri` and the
/// end time may be `24:00`. Example: "Mon-Fri 08:00-12:00, Mon-Fri 13:00-18:00".
class WeeklySchedule {
 public:
  static constexpr int kMinutesPerDay = 24 * 60;

  struct Interval {
    int day = 0;           // 0 = Monday
    int start_minute = 0;  // minutes since local midnight
    int end_minute = 0;    // exclusive, up to 1440

    friend auto operator<=>(const Interval&, const Interval&) = default;
  };

  /// Throws Error(kParse) with the 1-based line number on bad syntax,
  /// "inverted interval" or "overlapping intervals".
  static WeeklySchedule parse(std::string_view text);
  static WeeklySchedule always();

  /// Canonical text; parse(format()) reproduces the schedule.
  std::string format() const;

  bool contains(int day, int minute_of_day) const;
  const std::vector<Interval>& intervals() const { return intervals_; }

  friend bool operator==(const WeeklySchedule&, const WeeklySchedule&) = default;

 private:
  std::vector<Interval> intervals_;  // sorted by (day, start), disjoint
};

/// Day of week (0 = Monday) and minute of day for `t`. With an offset the
/// conversion is fixed; otherwise the process's local time zone is used.
struct LocalTime {
  int day = 0;
  int minute = 0;
};
LocalTime local_time(Timestamp t, std::optional<std::int64_t> utc_offset_seconds);

}  // namespace fleetwarden
