#include "fleetwarden/policy/schedule.hpp"

#include "fleetwarden/core/error.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <ctime>
#include <map>

namespace fleetwarden {
namespace {

constexpr std::array<std::string_view, 7> kDays = {"Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void fail(int line, const std::string& what) {
  throw Error(ErrorCode::kParse, "schedule line " + std::to_string(line) + ": " + what);
}

int parse_day(std::string_view text, int line) {
  for (std::size_t i = 0; i < kDays.size(); ++i) {
    if (text.size() == 3 && std::equal(text.begin(), text.end(), kDays[i].begin(), [](char a, char b) {
          return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
        })) {
      return static_cast<int>(i);
    }
  }
  fail(line, "unknown day '" + std::string(text) + "'");
}

int parse_clock(std::string_view text, int line) {
  if (text.size() != 5 || text[2] != ':' || !std::isdigit(static_cast<unsigned char>(text[0])) ||
      !std::isdigit(static_cast<unsigned char>(text[1])) || !std::isdigit(static_cast<unsigned char>(text[3])) ||
      !std::isdigit(static_cast<unsigned char>(text[4]))) {
    fail(line, "bad time '" + std::string(text) + "', expected HH:MM");
  }
  const int h = (text[0] - '0') * 10 + (text[1] - '0');
  const int m = (text[3] - '0') * 10 + (text[4] - '0');
  if (m > 59 || h > 24 || (h == 24 && m != 0)) fail(line, "time out of range '" + std::string(text) + "'");
  return h * 60 + m;
}

std::string format_clock(int minute) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d:%02d", minute / 60, minute % 60);
  return buf;
}

}  // namespace

WeeklySchedule WeeklySchedule::parse(std::string_view text) {
  struct Parsed {
    Interval interval;
    int line;
  };
  std::vector<Parsed> parsed;
  int line = 1;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = text.find_first_of(",\n", pos);
    const auto item = trim(text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
    if (!item.empty()) {
      const auto space = item.find_first_of(" \t");
      if (space == std::string_view::npos) fail(line, "expected '<days> <HH:MM>-<HH:MM>'");
      const auto days = item.substr(0, space);
      const auto times = trim(item.substr(space));
      int first = 0;
      int last = 0;
      if (auto dash = days.find('-'); dash != std::string_view::npos) {
        first = parse_day(days.substr(0, dash), line);
        last = parse_day(days.substr(dash + 1), line);
        if (last < first) fail(line, "inverted day range '" + std::string(days) + "'");
      } else {
        first = last = parse_day(days, line);
      }
      const auto dash = times.find('-');
      if (dash == std::string_view::npos) fail(line, "expected '<HH:MM>-<HH:MM>'");
      const int start = parse_clock(trim(times.substr(0, dash)), line);
      const int stop = parse_clock(trim(times.substr(dash + 1)), line);
      if (stop <= start) fail(line, "inverted interval '" + std::string(times) + "'");
      for (int d = first; d <= last; ++d) parsed.push_back({{d, start, stop}, line});
    }
    if (end == std::string_view::npos) break;
    if (text[end] == '\n') ++line;
    pos = end + 1;
  }
  std::stable_sort(parsed.begin(), parsed.end(),
                   [](const Parsed& a, const Parsed& b) { return a.interval < b.interval; });
  WeeklySchedule schedule;
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    if (i > 0 && parsed[i - 1].interval.day == parsed[i].interval.day &&
        parsed[i].interval.start_minute < parsed[i - 1].interval.end_minute) {
      fail(std::max(parsed[i].line, parsed[i - 1].line),
           "overlapping intervals on " + std::string(kDays[parsed[i].interval.day]));
    }
    schedule.intervals_.push_back(parsed[i].interval);
  }
  return schedule;
}

WeeklySchedule WeeklySchedule::always() {
  WeeklySchedule schedule;
  for (int d = 0; d < 7; ++d) schedule.intervals_.push_back({d, 0, kMinutesPerDay});
  return schedule;
}

std::string WeeklySchedule::format() const {
  // Group identical windows over runs of consecutive days.
  std::map<std::pair<int, int>, std::vector<int>> days_by_window;
  for (const auto& iv : intervals_) days_by_window[{iv.start_minute, iv.end_minute}].push_back(iv.day);
  struct Item {
    int first_day;
    int last_day;
    int start;
    int end;
  };
  std::vector<Item> items;
  for (const auto& [window, days] : days_by_window) {
    for (std::size_t i = 0; i < days.size();) {
      std::size_t j = i;
      while (j + 1 < days.size() && days[j + 1] == days[j] + 1) ++j;
      items.push_back({days[i], days[j], window.first, window.second});
      i = j + 1;
    }
  }
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
    return std::tie(a.first_day, a.start) < std::tie(b.first_day, b.start);
  });
  std::string out;
  for (const auto& item : items) {
    if (!out.empty()) out += ", ";
    out += kDays[item.first_day];
    if (item.last_day != item.first_day) {
      out += '-';
      out += kDays[item.last_day];
    }
    out += ' ' + format_clock(item.start) + '-' + format_clock(item.end);
  }
  return out;
}

bool WeeklySchedule::contains(int day, int minute_of_day) const {
  return std::any_of(intervals_.begin(), intervals_.end(), [&](const Interval& iv) {
    return iv.day == day && iv.start_minute <= minute_of_day && minute_of_day < iv.end_minute;
  });
}

LocalTime local_time(Timestamp t, std::optional<std::int64_t> utc_offset_seconds) {
  std::tm tm{};
  if (utc_offset_seconds) {
    const std::time_t shifted = static_cast<std::time_t>(t + *utc_offset_seconds);
    ::gmtime_r(&shifted, &tm);
  } else {
    const std::time_t raw = static_cast<std::time_t>(t);
    ::localtime_r(&raw, &tm);
  }
  return {(tm.tm_wday + 6) % 7, tm.tm_hour * 60 + tm.tm_min};
}

}  // namespace fleetwarden
