#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tws/config.hpp"
#include "tws/csv.hpp"
#include "tws/record.hpp"

namespace tws {

enum class InputFormat { ndjson, csv };

/// "ndjson" | "csv"; anything else is a configuration error.
InputFormat parse_input_format(std::string_view tag);

/// Source-side names of the six record fields (JSON keys or CSV header names).
struct FieldMap {
  std::string record_id = "record_id";
  std::string user_id = "user_id";
  std::string app_name = "app_name";
  std::string timestamp_utc = "timestamp_utc";
  std::string lat = "lat";
  std::string lon = "lon";

  /// Reads `field.<name>` keys, defaulting to the canonical names.
  static FieldMap from_config(const KeyValueConfig& config);
};

/// Rejection reason names reported in IngestStats.
namespace reject {
inline constexpr std::string_view malformed_line = "malformed_line";
inline constexpr std::string_view missing_field = "missing_field";
inline constexpr std::string_view bad_type = "bad_type";
inline constexpr std::string_view bad_timestamp = "bad_timestamp";
inline constexpr std::string_view lat_out_of_range = "lat_out_of_range";
inline constexpr std::string_view lon_out_of_range = "lon_out_of_range";
inline constexpr std::string_view empty_user_id = "empty_user_id";
inline constexpr std::string_view empty_app_name = "empty_app_name";
}  // namespace reject

/// Returns the first invariant the record violates, or an empty view.
std::string_view validate(const EventRecord& record);

/// Ingest counters. A commutative monoid under merge().
struct IngestStats {
  std::uint64_t records_read = 0;
  std::uint64_t records_rejected = 0;
  std::map<std::string, std::uint64_t, std::less<>> rejection_reasons;
  std::unordered_set<std::string> users;
  std::unordered_set<std::string> apps;

  std::uint64_t accepted() const noexcept { return records_read - records_rejected; }
  std::size_t distinct_users() const noexcept { return users.size(); }
  std::size_t distinct_apps() const noexcept { return apps.size(); }

  void accept(const EventRecord& record);
  void reject(std::string_view reason);
  void merge(const IngestStats& other);
};

/// Parses one NDJSON object into `out`. Returns the rejection reason, or an
/// empty view when the line yields a valid record. When `zone` is non-null a
/// `zone_id` member (string or null) is also read.
std::string_view parse_ndjson_line(std::string_view line, const FieldMap& fields,
                                   EventRecord& out,
                                   std::optional<std::string>* zone = nullptr);

/// Lazy record stream over NDJSON or CSV input. Malformed lines are counted
/// in stats() and skipped; they never end the stream. Blank lines are not
/// records and are not counted.
class RecordReader {
 public:
  RecordReader(std::istream& in, InputFormat format, FieldMap fields = {});

  std::optional<EventRecord> next();
  const IngestStats& stats() const noexcept { return stats_; }

 private:
  void read_csv_header();

  std::istream& in_;
  InputFormat format_;
  FieldMap fields_;
  IngestStats stats_;
  std::string line_;
  std::optional<csv::Reader> csv_;
  std::vector<std::string> row_;
  std::array<std::size_t, 6> columns_{};
  std::size_t header_width_ = 0;
};

/// Drains a RecordReader. Throws Error(io) if the stream goes bad.
std::vector<EventRecord> parse_stream(std::istream& in, InputFormat format,
                                      const FieldMap& fields, IngestStats& stats);

/// Parses an in-memory NDJSON buffer, splitting it at line boundaries across
/// worker threads. Output order and stats equal a sequential parse.
std::vector<EventRecord> parse_ndjson_buffer(std::string_view buffer, const FieldMap& fields,
                                             IngestStats& stats);

/// Reads the canonical zoned NDJSON written by write_ndjson().
std::vector<ZonedRecord> read_zoned_ndjson(std::istream& in, IngestStats& stats);

/// Canonical NDJSON serialization (field order: record_id, user_id,
/// app_name, timestamp_utc, lat, lon[, zone_id]). Lossless for doubles.
std::string to_ndjson(const EventRecord& record);
std::string to_ndjson(const ZonedRecord& record);

/// Number of records whose record_id was already seen earlier in the input.
std::uint64_t count_duplicate_ids(std::span<const EventRecord> records);

// -- per-application census --------------------------------------------------

struct AppCensusRow {
  std::string app_name;
  std::uint64_t user_count = 0;
  std::uint64_t tweet_count = 0;
  std::uint64_t max_single_user_tweets = 0;

  friend bool operator==(const AppCensusRow&, const AppCensusRow&) = default;
};

/// Per-(app, user) tweet tallies; merge() is associative and commutative,
/// so census(A ++ B) == merge(census(A), census(B)).
class AppCensus {
 public:
  void add(std::string_view app, std::string_view user, std::uint64_t count = 1);
  void add(const EventRecord& record) { add(record.app_name, record.user_id); }
  void merge(const AppCensus& other);

  /// One row per app, sorted by app name.
  std::vector<AppCensusRow> table() const;
  std::uint64_t total() const noexcept { return total_; }

 private:
  std::map<std::string, std::unordered_map<std::string, std::uint64_t>, std::less<>> per_app_;
  std::uint64_t total_ = 0;
};

AppCensus app_user_census(std::span<const EventRecord> records);
AppCensus app_user_census(std::span<const ZonedRecord> records);

void write_census_csv(std::ostream& out, std::span<const AppCensusRow> rows);
std::vector<AppCensusRow> read_census_csv(std::istream& in);

}  // namespace tws
