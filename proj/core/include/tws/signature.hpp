#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tws/civil_time.hpp"
#include "tws/matrix.hpp"
#include "tws/record.hpp"

namespace tws {

/// Weekly binning grid, origin Monday 00:00 local time. Bin widths must be
/// whole quarter hours dividing the 10,080-minute week.
class BinningSpec {
 public:
  explicit BinningSpec(int bin_minutes = 15);

  static BinningSpec quarter_hour() { return BinningSpec(15); }
  static BinningSpec six_hour() { return BinningSpec(360); }

  int bin_minutes() const noexcept { return bin_minutes_; }
  std::size_t bins() const noexcept { return static_cast<std::size_t>(kMinutesPerWeek / bin_minutes_); }
  /// The sparse-bin validity rule only applies at 15-minute resolution.
  bool has_validity_rule() const noexcept { return bin_minutes_ == 15; }

  friend bool operator==(const BinningSpec&, const BinningSpec&) = default;

 private:
  int bin_minutes_;
};

/// Share above which a single 15-minute bin invalidates a signature.
inline constexpr double kMaxBinShare = 0.10;

std::size_t bin_index(const CivilDateTime& local, const BinningSpec& spec);
std::size_t bin_index_local(std::int64_t local_seconds, const BinningSpec& spec);

/// For each bin, how many separate times the local wall clock enters it
/// during the span. A repeated hour at a backward transition counts twice
/// for the bins it covers; a skipped hour counts zero.
std::vector<std::uint64_t> bin_occurrences(const BinningSpec& spec, const DateRange& span,
                                           const TzTable& tz);

struct WeeklyHistogram {
  std::string zone_id;
  BinningSpec spec;
  std::vector<std::uint64_t> counts;       // raw tally per bin
  std::vector<std::uint64_t> occurrences;  // calendar occurrences per bin in the span
  std::vector<double> mu;                  // counts / occurrences (0 where no occurrence)

  std::uint64_t total() const noexcept;
};

/// Typical weekly signature: T[i] = mu[i] / sum(mu).
struct Signature {
  std::string zone_id;
  BinningSpec spec;
  std::vector<double> T;
  std::uint64_t total_tweets = 0;
  double max_share = 0.0;
  bool valid = true;
};

/// Mergeable per-zone histogram builder. Tallies are integers, so any
/// sharding of the input merges to exactly the single-pass result.
class HistogramAccumulator {
 public:
  HistogramAccumulator(BinningSpec spec, DateRange span, TzTable tz = {});

  void add(std::string_view zone_id, std::int64_t timestamp_utc);
  /// Unzoned records are counted in skipped_unzoned() and otherwise ignored.
  void add(const ZonedRecord& record);
  void add_all(std::span<const ZonedRecord> records);

  /// Throws Error(usage) if the spec, span or tz table differ.
  void merge(const HistogramAccumulator& other);

  std::map<std::string, WeeklyHistogram> finalize() const;
  /// All zones pooled (the city-wide histogram).
  WeeklyHistogram finalize_total(std::string id = "ALL") const;

  std::uint64_t skipped_outside_span() const noexcept { return outside_span_; }
  std::uint64_t skipped_unzoned() const noexcept { return unzoned_; }
  const BinningSpec& spec() const noexcept { return spec_; }
  const DateRange& span() const noexcept { return span_; }

 private:
  WeeklyHistogram make_histogram(std::string id, const std::vector<std::uint64_t>& counts) const;

  BinningSpec spec_;
  DateRange span_;
  TzTable tz_;
  std::int64_t utc_lo_ = 0;
  std::int64_t utc_hi_ = 0;
  std::vector<std::uint64_t> occurrences_;
  std::map<std::string, std::vector<std::uint64_t>, std::less<>> counts_;
  std::uint64_t outside_span_ = 0;
  std::uint64_t unzoned_ = 0;
};

std::map<std::string, WeeklyHistogram> accumulate(std::span<const ZonedRecord> records,
                                                  const BinningSpec& spec, const DateRange& span,
                                                  const TzTable& tz = {});

/// Smallest whole-day local span covering every record's timestamp.
DateRange covering_span(std::span<const ZonedRecord> records, const TzTable& tz = {});

/// Throws Error(empty_zone) when sum(mu) == 0.
Signature normalize(const WeeklyHistogram& hist);

/// Normalizes every histogram, skipping empty zones.
std::vector<Signature> normalize_all(const std::map<std::string, WeeklyHistogram>& hists);

struct AppSignatureMatrix {
  std::string zone_id;
  BinningSpec spec;
  std::vector<std::string> apps;
  std::vector<double> features;  // apps.size() * spec.bins(), app-major
};

/// The top_k apps by tweet count, ordered by descending count then name.
/// Throws Error(config) when fewer than top_k apps are present.
std::vector<std::string> top_apps(std::span<const ZonedRecord> records, std::size_t top_k);

/// Concatenated per-app signatures. A zone is kept only if each of the
/// top apps yields a non-empty valid signature there.
std::map<std::string, AppSignatureMatrix> per_app_signatures(std::span<const ZonedRecord> records,
                                                             const BinningSpec& spec,
                                                             const DateRange& span,
                                                             const TzTable& tz = {},
                                                             std::size_t top_k = 4);

// -- file formats ---------------------------------------------------------------

/// zone_id,T_0,...,T_{N-1}
void write_signatures_csv(std::ostream& out, std::span<const Signature> signatures);
/// Inverse of write_signatures_csv; signatures read back are marked valid
/// with total_tweets = 0. Bin width is inferred from the column count.
std::vector<Signature> read_signatures_csv(std::istream& in);
/// zone_id,total_tweets,max_share,valid
void write_signature_meta_csv(std::ostream& out, std::span<const Signature> signatures);
/// zone_id,total,mu_0,...,mu_{N-1}
void write_histograms_csv(std::ostream& out, const std::map<std::string, WeeklyHistogram>& hists);
std::map<std::string, WeeklyHistogram> read_histograms_csv(std::istream& in);
/// zone_id,<app>:T_0,...
void write_app_signatures_csv(std::ostream& out,
                              const std::map<std::string, AppSignatureMatrix>& matrices);
struct FeatureTable {
  std::vector<std::string> zones;
  std::vector<std::string> columns;
  Matrix values;
};
/// Reads any `zone_id,<feature...>` CSV (signatures or per-app matrices).
FeatureTable read_feature_csv(std::istream& in);

/// Rows of the valid signatures stacked in the given order.
Matrix signature_matrix(std::span<const Signature> signatures);

}  // namespace tws
