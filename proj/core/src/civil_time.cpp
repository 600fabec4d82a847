#include "tws/civil_time.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>

#include "tws/error.hpp"

namespace tws {
namespace {

int parse_int(std::string_view text, std::string_view what) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    throw Error(ErrorCode::config, "invalid " + std::string(what) + ": '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

std::int64_t days_from_civil(const CivilDate& date) {
  using namespace std::chrono;
  const year_month_day ymd{year{date.year}, month{date.month}, day{date.day}};
  return sys_days{ymd}.time_since_epoch().count();
}

CivilDate civil_from_days(std::int64_t days) {
  using namespace std::chrono;
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  return {static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
          static_cast<unsigned>(ymd.day())};
}

CivilDateTime civil_from_local_seconds(std::int64_t local_seconds) {
  const std::int64_t days = floor_div(local_seconds, kSecondsPerDay);
  const std::int64_t sod = local_seconds - days * kSecondsPerDay;
  CivilDateTime out;
  out.date = civil_from_days(days);
  out.hour = static_cast<int>(sod / 3600);
  out.minute = static_cast<int>((sod % 3600) / 60);
  out.second = static_cast<int>(sod % 60);
  out.weekday = weekday_from_days(days);
  return out;
}

std::int64_t parse_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw Error(ErrorCode::config, "invalid date (want YYYY-MM-DD): '" + std::string(text) + "'");
  }
  const CivilDate date{parse_int(text.substr(0, 4), "year"),
                       static_cast<unsigned>(parse_int(text.substr(5, 2), "month")),
                       static_cast<unsigned>(parse_int(text.substr(8, 2), "day"))};
  using namespace std::chrono;
  if (!year_month_day{year{date.year}, month{date.month}, day{date.day}}.ok()) {
    throw Error(ErrorCode::config, "invalid calendar date: '" + std::string(text) + "'");
  }
  return days_from_civil(date);
}

std::string format_date(std::int64_t days) {
  const CivilDate d = civil_from_days(days);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", d.year, d.month, d.day);
  return buf;
}

std::int64_t parse_utc_offset(std::string_view text) {
  if (text == "Z" || text == "UTC") return 0;
  if (text.size() == 6 && (text[0] == '+' || text[0] == '-') && text[3] == ':') {
    const int h = parse_int(text.substr(1, 2), "offset hours");
    const int m = parse_int(text.substr(4, 2), "offset minutes");
    const std::int64_t s = (h * 60 + m) * 60;
    return text[0] == '-' ? -s : s;
  }
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    throw Error(ErrorCode::config, "invalid UTC offset: '" + std::string(text) + "'");
  }
  return value;
}

std::int64_t parse_utc_instant(std::string_view text) {
  // YYYY-MM-DDTHH:MM[:SS]Z
  if (text.size() < 17 || text[10] != 'T' || text.back() != 'Z') {
    throw Error(ErrorCode::config, "invalid UTC instant: '" + std::string(text) + "'");
  }
  const std::int64_t days = parse_date(text.substr(0, 10));
  const std::string_view clock = text.substr(11, text.size() - 12);
  int h = 0, m = 0, s = 0;
  if (clock.size() == 5 && clock[2] == ':') {
    h = parse_int(clock.substr(0, 2), "hour");
    m = parse_int(clock.substr(3, 2), "minute");
  } else if (clock.size() == 8 && clock[2] == ':' && clock[5] == ':') {
    h = parse_int(clock.substr(0, 2), "hour");
    m = parse_int(clock.substr(3, 2), "minute");
    s = parse_int(clock.substr(6, 2), "second");
  } else {
    throw Error(ErrorCode::config, "invalid UTC instant: '" + std::string(text) + "'");
  }
  return days * kSecondsPerDay + h * 3600 + m * 60 + s;
}

TzTable::TzTable(std::int64_t base_offset,
                 std::vector<std::pair<std::int64_t, std::int64_t>> transitions)
    : base_offset_(base_offset), transitions_(std::move(transitions)) {
  auto check = [](std::int64_t off) {
    if (off % 900 != 0) {
      throw Error(ErrorCode::config, "UTC offsets must be multiples of 15 minutes");
    }
  };
  check(base_offset_);
  for (const auto& [at, off] : transitions_) check(off);
  std::stable_sort(transitions_.begin(), transitions_.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
}

std::int64_t TzTable::offset_at(std::int64_t utc_seconds) const {
  auto it = std::upper_bound(
      transitions_.begin(), transitions_.end(), utc_seconds,
      [](std::int64_t t, const auto& tr) { return t < tr.first; });
  if (it == transitions_.begin()) return base_offset_;
  return std::prev(it)->second;
}

std::int64_t TzTable::local_to_utc(std::int64_t local_seconds) const {
  // Candidate instants: one per distinct offset, plus each transition
  // instant (covers local times skipped by a forward jump).
  std::int64_t best = INT64_MAX;
  auto consider = [&](std::int64_t utc) {
    if (to_local(utc) >= local_seconds && utc < best) best = utc;
  };
  auto try_offset = [&](std::int64_t off) {
    const std::int64_t utc = local_seconds - off;
    if (offset_at(utc) == off) consider(utc);
  };
  try_offset(base_offset_);
  for (const auto& [at, off] : transitions_) {
    try_offset(off);
    if (to_local(at) >= local_seconds && to_local(at - 1) < local_seconds) consider(at);
  }
  if (best == INT64_MAX) best = local_seconds - base_offset_;
  return best;
}

DateRange parse_date_range(std::string_view text) {
  const auto pos = text.find("..");
  if (pos == std::string_view::npos) {
    throw Error(ErrorCode::config, "invalid date range (want A..B): '" + std::string(text) + "'");
  }
  DateRange r{parse_date(text.substr(0, pos)), parse_date(text.substr(pos + 2))};
  if (r.end_day <= r.first_day) {
    throw Error(ErrorCode::config, "empty date range: '" + std::string(text) + "'");
  }
  return r;
}

}  // namespace tws
