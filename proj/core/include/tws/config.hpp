#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tws/civil_time.hpp"

namespace tws {

/// Flat `key = value` configuration. `#` starts a comment, blank lines are
/// ignored, keys may repeat (see all()), values may be double-quoted.
///
///   format = csv
///   field.user_id = uid
///   tz.offset = -05:00
///   tz.transition = 2015-03-08T07:00Z -04:00
///   botfilter.max_user_share = 0.05
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in);
  static KeyValueConfig load(const std::filesystem::path& path);

  bool contains(std::string_view key) const;
  std::optional<std::string> get(std::string_view key) const;
  std::vector<std::string> all(std::string_view key) const;

  std::string get_or(std::string_view key, std::string fallback) const;
  double get_double(std::string_view key, double fallback) const;
  std::int64_t get_int(std::string_view key, std::int64_t fallback) const;

  void set(std::string key, std::string value);

 private:
  std::multimap<std::string, std::string, std::less<>> entries_;
};

/// Builds a TzTable from `tz.offset` and repeated
/// `tz.transition = <UTC instant> <offset>` keys. Missing keys mean UTC.
TzTable tz_table_from_config(const KeyValueConfig& config);

}  // namespace tws
