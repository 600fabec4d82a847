#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tws {

constexpr std::int64_t kSecondsPerDay = 86400;
constexpr std::int64_t kMinutesPerWeek = 10080;

/// Floor division that rounds toward negative infinity.
constexpr std::int64_t floor_div(std::int64_t a, std::int64_t b) noexcept {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

struct CivilDate {
  int year = 1970;
  unsigned month = 1;
  unsigned day = 1;

  friend bool operator==(const CivilDate&, const CivilDate&) = default;
};

/// Wall-clock date and time. `weekday` counts from Monday = 0.
struct CivilDateTime {
  CivilDate date;
  int hour = 0;
  int minute = 0;
  int second = 0;
  int weekday = 0;
};

/// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(const CivilDate& date);
CivilDate civil_from_days(std::int64_t days);

/// Monday = 0 ... Sunday = 6.
constexpr int weekday_from_days(std::int64_t days) noexcept {
  return static_cast<int>(((days + 3) % 7 + 7) % 7);
}

CivilDateTime civil_from_local_seconds(std::int64_t local_seconds);

/// "YYYY-MM-DD" -> days since epoch. Throws Error(config) on bad input.
std::int64_t parse_date(std::string_view text);
std::string format_date(std::int64_t days);

/// "+HH:MM" / "-HH:MM" / "Z" / integer seconds -> offset in seconds.
std::int64_t parse_utc_offset(std::string_view text);

/// "YYYY-MM-DDTHH:MM[:SS]Z" -> seconds since epoch.
std::int64_t parse_utc_instant(std::string_view text);

/// Fixed-offset table with explicit transitions: `base_offset` applies
/// before the first transition; each transition sets the offset from its
/// UTC instant onward. Offsets must be whole multiples of 15 minutes so
/// that every 15-minute UTC step lies inside one local quarter hour.
class TzTable {
 public:
  TzTable() = default;
  explicit TzTable(std::int64_t base_offset,
                   std::vector<std::pair<std::int64_t, std::int64_t>> transitions = {});

  static TzTable utc() { return TzTable{}; }

  std::int64_t offset_at(std::int64_t utc_seconds) const;
  std::int64_t to_local(std::int64_t utc_seconds) const {
    return utc_seconds + offset_at(utc_seconds);
  }
  /// Earliest UTC instant whose local time is >= the given local time.
  /// For local times skipped by a forward transition this is the
  /// transition instant itself.
  std::int64_t local_to_utc(std::int64_t local_seconds) const;

  std::int64_t base_offset() const noexcept { return base_offset_; }
  const std::vector<std::pair<std::int64_t, std::int64_t>>& transitions() const noexcept {
    return transitions_;
  }

 private:
  std::int64_t base_offset_ = 0;
  std::vector<std::pair<std::int64_t, std::int64_t>> transitions_;
};

/// Half-open range of local calendar days [first_day, end_day).
struct DateRange {
  std::int64_t first_day = 0;
  std::int64_t end_day = 0;

  std::int64_t days() const noexcept { return end_day - first_day; }
  friend bool operator==(const DateRange&, const DateRange&) = default;
};

/// "YYYY-MM-DD..YYYY-MM-DD" (end exclusive).
DateRange parse_date_range(std::string_view text);

}  // namespace tws
