#include "tws/events.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tws/csv.hpp"
#include "tws/error.hpp"

namespace tws {
namespace {

constexpr std::size_t kWeekBins = 28;

void check_bins(const WeekObservation& obs, std::size_t baseline_bins, const std::string& baseline_zone) {
  if (obs.zone_id != baseline_zone) {
    throw Error(ErrorCode::usage, "baseline zone '" + baseline_zone + "' does not match observed zone '" +
                                      obs.zone_id + "'");
  }
  if (obs.counts.size() != kWeekBins || baseline_bins != kWeekBins) {
    throw Error(ErrorCode::usage, "event scoring needs 28 six-hour bins");
  }
}

// In shape mode the residual is taken as total * (share - T): the same
// quantity, but exactly zero when the observed shares equal T.
AnomalyReport score(const WeekObservation& obs, std::span<const double> expected,
                    std::span<const double> expected_share, double threshold, bool shape) {
  AnomalyReport report{obs.zone_id, obs.week_start_day, threshold, {}};
  report.bins.reserve(kWeekBins);
  const double week_total = static_cast<double>(obs.total());
  for (std::size_t i = 0; i < kWeekBins; ++i) {
    BinAnomaly b;
    b.bin = i;
    b.observed_count = static_cast<double>(obs.counts[i]);
    b.expected_count = expected[i];
    if (obs.share.size() == kWeekBins) b.observed_share = obs.share[i];
    else b.observed_share = week_total > 0.0 ? b.observed_count / week_total : 0.0;
    b.expected_share = expected_share[i];
    const double residual = shape ? week_total * (b.observed_share - b.expected_share)
                                              : b.observed_count - b.expected_count;
    b.score = residual / std::sqrt(std::max(b.expected_count, 1.0));
    b.flagged = std::abs(b.score) >= threshold;
    report.bins.push_back(b);
  }
  return report;
}

}  // namespace

std::uint64_t WeekObservation::total() const noexcept {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

std::size_t AnomalyReport::flagged_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(bins.begin(), bins.end(), [](const BinAnomaly& b) { return b.flagged; }));
}

std::map<std::string, WeekObservation> observe_week(std::span<const ZonedRecord> records,
                                                    std::int64_t week_start_day, const TzTable& tz) {
  const BinningSpec spec = BinningSpec::six_hour();
  const std::int64_t lo = tz.local_to_utc(week_start_day * kSecondsPerDay);
  const std::int64_t hi = tz.local_to_utc((week_start_day + 7) * kSecondsPerDay);
  std::map<std::string, WeekObservation> out;
  for (const auto& r : records) {
    if (!r.zone_id) continue;
    const std::int64_t t = r.record.timestamp_utc;
    if (t < lo || t >= hi) continue;
    auto it = out.find(*r.zone_id);
    if (it == out.end()) {
      it = out.emplace(*r.zone_id, WeekObservation{*r.zone_id, week_start_day,
                                                   std::vector<std::uint64_t>(kWeekBins, 0), {}})
               .first;
    }
    ++it->second.counts[bin_index_local(tz.to_local(t), spec)];
  }
  for (auto& [zone, obs] : out) {
    const double total = static_cast<double>(obs.total());
    obs.share.resize(kWeekBins);
    for (std::size_t i = 0; i < kWeekBins; ++i) obs.share[i] = static_cast<double>(obs.counts[i]) / total;
  }
  return out;
}

AnomalyReport score_week(const WeekObservation& obs, const Signature& baseline, double threshold) {
  check_bins(obs, baseline.T.size(), baseline.zone_id);
  if (!baseline.valid) throw Error(ErrorCode::usage, "baseline signature for '" + baseline.zone_id + "' is invalid");
  const double total = static_cast<double>(obs.total());
  std::vector<double> expected(kWeekBins);
  for (std::size_t i = 0; i < kWeekBins; ++i) expected[i] = baseline.T[i] * total;
  return score(obs, expected, baseline.T, threshold, true);
}

AnomalyReport score_week_absolute(const WeekObservation& obs, const WeeklyHistogram& baseline,
                                  double threshold) {
  check_bins(obs, baseline.mu.size(), baseline.zone_id);
  const double sum = std::accumulate(baseline.mu.begin(), baseline.mu.end(), 0.0);
  if (!(sum > 0.0)) throw Error(ErrorCode::empty_zone, "baseline for '" + baseline.zone_id + "' is empty");
  std::vector<double> share(kWeekBins);
  for (std::size_t i = 0; i < kWeekBins; ++i) share[i] = baseline.mu[i] / sum;
  return score(obs, baseline.mu, share, threshold, false);
}

void write_anomaly_csv(std::ostream& out, std::span<const AnomalyReport> reports) {
  csv::Writer w(out);
  w.row({"zone", "bin", "observed", "expected", "observed_share", "expected_share", "score", "flagged"});
  for (const auto& r : reports) {
    for (const auto& b : r.bins) {
      w.field(r.zone_id).field(b.bin).field(b.observed_count).field(b.expected_count)
          .field(b.observed_share).field(b.expected_share).field(b.score).field(b.flagged);
      w.end_row();
    }
  }
}

}  // namespace tws
