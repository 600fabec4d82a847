#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "tws/civil_time.hpp"
#include "tws/record.hpp"
#include "tws/signature.hpp"

namespace tws {

/// Activity of one zone during one specific local week, in 6-hour bins.
struct WeekObservation {
  std::string zone_id;
  std::int64_t week_start_day = 0;
  std::vector<std::uint64_t> counts;  // 28 bins
  std::vector<double> share;          // counts / total

  std::uint64_t total() const noexcept;
};

/// Tallies records with local timestamps in [week_start, week_start + 7 days).
/// Zones without any record in that window are omitted.
std::map<std::string, WeekObservation> observe_week(std::span<const ZonedRecord> records,
                                                    std::int64_t week_start_day,
                                                    const TzTable& tz = {});

struct BinAnomaly {
  std::size_t bin = 0;
  double observed_count = 0.0;
  double expected_count = 0.0;
  double observed_share = 0.0;
  double expected_share = 0.0;
  double score = 0.0;
  bool flagged = false;
};

struct AnomalyReport {
  std::string zone_id;
  std::int64_t week_start_day = 0;
  double threshold = 2.0;
  std::vector<BinAnomaly> bins;

  std::size_t flagged_count() const noexcept;
};

inline constexpr double kDefaultAnomalyThreshold = 2.0;

/// Shape mode: E[i] = baseline.T[i] * observed week total and
/// score[i] = (observed[i] - E[i]) / sqrt(max(E[i], 1)); flagged iff
/// |score| >= threshold. Throws Error(usage) on zone or bin mismatch.
AnomalyReport score_week(const WeekObservation& obs, const Signature& baseline,
                         double threshold = kDefaultAnomalyThreshold);

/// Volume mode: E[i] is the baseline's mean count for the bin (mu[i]).
AnomalyReport score_week_absolute(const WeekObservation& obs, const WeeklyHistogram& baseline,
                                  double threshold = kDefaultAnomalyThreshold);

/// zone,bin,observed,expected,observed_share,expected_share,score,flagged
void write_anomaly_csv(std::ostream& out, std::span<const AnomalyReport> reports);

}  // namespace tws
