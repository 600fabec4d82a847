#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tws/config.hpp"
#include "tws/ingest.hpp"
#include "tws/record.hpp"

namespace tws {

/// An app is automated when one user holds strictly more than
/// `max_user_share` of its tweets AND that user has strictly more than
/// `max_user_tweets` tweets over the whole dataset.
struct BotThresholds {
  double max_user_share = 0.05;
  std::uint64_t max_user_tweets = 1000;

  /// `botfilter.max_user_share`, `botfilter.max_user_tweets`.
  static BotThresholds from_config(const KeyValueConfig& config);
};

struct AppVerdict {
  std::string app_name;
  std::uint64_t user_count = 0;
  std::uint64_t tweet_count = 0;
  double max_user_share = 0.0;
  std::uint64_t max_user_tweets = 0;
  bool dropped = false;
};

AppVerdict judge_app(const AppCensusRow& row, const BotThresholds& thresholds = {});
std::vector<AppVerdict> judge_apps(std::span<const AppCensusRow> census,
                                   const BotThresholds& thresholds = {});

struct DropReport {
  std::uint64_t total_records = 0;
  std::uint64_t dropped_records = 0;
  std::vector<AppVerdict> dropped_apps;  // sorted by tweet count, descending

  double dropped_fraction() const noexcept {
    return total_records == 0 ? 0.0
                              : static_cast<double>(dropped_records) / static_cast<double>(total_records);
  }
};

/// Drops every record of a dropped app. A record whose app has no verdict
/// means the verdicts are stale: Error(config).
std::vector<ZonedRecord> filter_records(std::span<const ZonedRecord> records,
                                        std::span<const AppVerdict> verdicts,
                                        DropReport* report = nullptr);

/// Columns mirror the published table: application, users, tweets, "tweets,%"
/// (the last is the app's fraction of all tweets).
void write_drop_report_csv(std::ostream& out, const DropReport& report);
void write_verdicts_csv(std::ostream& out, std::span<const AppVerdict> verdicts);

}  // namespace tws
