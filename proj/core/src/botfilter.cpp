#include "tws/botfilter.hpp"

#include <algorithm>

#include "tws/csv.hpp"
#include "tws/error.hpp"

namespace tws {

BotThresholds BotThresholds::from_config(const KeyValueConfig& config) {
  BotThresholds t;
  t.max_user_share = config.get_double("botfilter.max_user_share", t.max_user_share);
  const auto tweets = config.get_int("botfilter.max_user_tweets", static_cast<std::int64_t>(t.max_user_tweets));
  if (t.max_user_share < 0.0 || t.max_user_share > 1.0 || tweets < 0) {
    throw Error(ErrorCode::config, "botfilter thresholds out of range");
  }
  t.max_user_tweets = static_cast<std::uint64_t>(tweets);
  return t;
}

AppVerdict judge_app(const AppCensusRow& row, const BotThresholds& thresholds) {
  AppVerdict v;
  v.app_name = row.app_name;
  v.user_count = row.user_count;
  v.tweet_count = row.tweet_count;
  v.max_user_tweets = row.max_single_user_tweets;
  v.max_user_share = row.tweet_count == 0
                         ? 0.0
                         : static_cast<double>(row.max_single_user_tweets) /
                               static_cast<double>(row.tweet_count);
  v.dropped = v.max_user_share > thresholds.max_user_share &&
              v.max_user_tweets > thresholds.max_user_tweets;
  return v;
}

std::vector<AppVerdict> judge_apps(std::span<const AppCensusRow> census,
                                   const BotThresholds& thresholds) {
  std::vector<AppVerdict> out;
  out.reserve(census.size());
  for (const auto& row : census) out.push_back(judge_app(row, thresholds));
  std::sort(out.begin(), out.end(),
            [](const AppVerdict& a, const AppVerdict& b) { return a.app_name < b.app_name; });
  return out;
}

std::vector<ZonedRecord> filter_records(std::span<const ZonedRecord> records,
                                        std::span<const AppVerdict> verdicts,
                                        DropReport* report) {
  std::unordered_map<std::string_view, const AppVerdict*> lookup;
  for (const auto& v : verdicts) lookup.emplace(v.app_name, &v);

  std::unordered_map<std::string_view, std::uint64_t> dropped_counts;
  std::vector<ZonedRecord> kept;
  kept.reserve(records.size());
  for (const auto& r : records) {
    auto it = lookup.find(r.record.app_name);
    if (it == lookup.end()) {
      throw Error(ErrorCode::config,
                  "no verdict for app '" + r.record.app_name + "' (verdicts are stale)");
    }
    if (it->second->dropped) {
      ++dropped_counts[it->second->app_name];
    } else {
      kept.push_back(r);
    }
  }

  if (report) {
    report->total_records = records.size();
    report->dropped_records = records.size() - kept.size();
    report->dropped_apps.clear();
    for (const auto& v : verdicts) {
      if (!v.dropped) continue;
      AppVerdict row = v;
      // Counts reflect this stream, which may be a subset of the census.
      auto c = dropped_counts.find(v.app_name);
      row.tweet_count = c == dropped_counts.end() ? 0 : c->second;
      report->dropped_apps.push_back(std::move(row));
    }
    std::stable_sort(report->dropped_apps.begin(), report->dropped_apps.end(),
                     [](const AppVerdict& a, const AppVerdict& b) { return a.tweet_count > b.tweet_count; });
  }
  return kept;
}

void write_drop_report_csv(std::ostream& out, const DropReport& report) {
  csv::Writer w(out);
  w.row({"application", "users", "tweets", "tweets,%"});
  for (const auto& app : report.dropped_apps) {
    const double share = report.total_records == 0
                             ? 0.0
                             : static_cast<double>(app.tweet_count) / static_cast<double>(report.total_records);
    w.field(app.app_name).field(app.user_count).field(app.tweet_count).field(share);
    w.end_row();
  }
}

void write_verdicts_csv(std::ostream& out, std::span<const AppVerdict> verdicts) {
  csv::Writer w(out);
  w.row({"app_name", "user_count", "tweet_count", "max_user_share", "max_user_tweets", "dropped"});
  for (const auto& v : verdicts) {
    w.field(v.app_name).field(v.user_count).field(v.tweet_count).field(v.max_user_share)
        .field(v.max_user_tweets).field(v.dropped);
    w.end_row();
  }
}

}  // namespace tws
