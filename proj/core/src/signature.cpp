#include "tws/signature.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "tws/csv.hpp"
#include "tws/error.hpp"

namespace tws {
namespace {

constexpr std::int64_t kStepSeconds = 900;

double parse_double(const std::string& text, std::string_view what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    throw Error(ErrorCode::validation, std::string(what) + ": not a number: '" + text + "'");
  }
  return v;
}

std::int64_t local_week(std::int64_t local_seconds) {
  return floor_div(floor_div(local_seconds, kSecondsPerDay) + 3, 7);
}

}  // namespace

BinningSpec::BinningSpec(int bin_minutes) : bin_minutes_(bin_minutes) {
  if (bin_minutes <= 0 || bin_minutes % 15 != 0 || kMinutesPerWeek % bin_minutes != 0) {
    throw Error(ErrorCode::config, "bin width " + std::to_string(bin_minutes) +
                                       " min must be a multiple of 15 dividing 10080");
  }
}

std::size_t bin_index(const CivilDateTime& local, const BinningSpec& spec) {
  const int minute_of_week = local.weekday * 1440 + local.hour * 60 + local.minute;
  return static_cast<std::size_t>(minute_of_week / spec.bin_minutes());
}

std::size_t bin_index_local(std::int64_t local_seconds, const BinningSpec& spec) {
  const std::int64_t days = floor_div(local_seconds, kSecondsPerDay);
  const std::int64_t minute_of_day = (local_seconds - days * kSecondsPerDay) / 60;
  const std::int64_t minute_of_week = weekday_from_days(days) * 1440 + minute_of_day;
  return static_cast<std::size_t>(minute_of_week / spec.bin_minutes());
}

std::vector<std::uint64_t> bin_occurrences(const BinningSpec& spec, const DateRange& span,
                                           const TzTable& tz) {
  std::vector<std::uint64_t> occ(spec.bins(), 0);
  const std::int64_t lo = tz.local_to_utc(span.first_day * kSecondsPerDay);
  const std::int64_t hi = tz.local_to_utc(span.end_day * kSecondsPerDay);
  std::size_t prev_bin = std::numeric_limits<std::size_t>::max();
  std::int64_t prev_week = std::numeric_limits<std::int64_t>::min();
  for (std::int64_t t = lo; t < hi; t += kStepSeconds) {
    const std::int64_t local = tz.to_local(t);
    const std::size_t b = bin_index_local(local, spec);
    const std::int64_t w = local_week(local);
    if (b != prev_bin || w != prev_week) ++occ[b];
    prev_bin = b;
    prev_week = w;
  }
  return occ;
}

std::uint64_t WeeklyHistogram::total() const noexcept {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

HistogramAccumulator::HistogramAccumulator(BinningSpec spec, DateRange span, TzTable tz)
    : spec_(spec), span_(span), tz_(std::move(tz)) {
  if (span_.end_day <= span_.first_day) throw Error(ErrorCode::usage, "empty date span");
  utc_lo_ = tz_.local_to_utc(span_.first_day * kSecondsPerDay);
  utc_hi_ = tz_.local_to_utc(span_.end_day * kSecondsPerDay);
  occurrences_ = bin_occurrences(spec_, span_, tz_);
}

void HistogramAccumulator::add(std::string_view zone_id, std::int64_t timestamp_utc) {
  if (timestamp_utc < utc_lo_ || timestamp_utc >= utc_hi_) {
    ++outside_span_;
    return;
  }
  auto it = counts_.find(zone_id);
  if (it == counts_.end()) {
    it = counts_.emplace(std::string(zone_id), std::vector<std::uint64_t>(spec_.bins(), 0)).first;
  }
  ++it->second[bin_index_local(tz_.to_local(timestamp_utc), spec_)];
}

void HistogramAccumulator::add(const ZonedRecord& record) {
  if (!record.zone_id) {
    ++unzoned_;
    return;
  }
  add(*record.zone_id, record.record.timestamp_utc);
}

void HistogramAccumulator::add_all(std::span<const ZonedRecord> records) {
  for (const auto& r : records) add(r);
}

void HistogramAccumulator::merge(const HistogramAccumulator& other) {
  if (!(spec_ == other.spec_) || !(span_ == other.span_) ||
      tz_.base_offset() != other.tz_.base_offset() || tz_.transitions() != other.tz_.transitions()) {
    throw Error(ErrorCode::usage, "cannot merge histograms with different binning, span or tz");
  }
  for (const auto& [zone, counts] : other.counts_) {
    auto& mine = counts_[zone];
    if (mine.empty()) mine.assign(spec_.bins(), 0);
    for (std::size_t i = 0; i < counts.size(); ++i) mine[i] += counts[i];
  }
  outside_span_ += other.outside_span_;
  unzoned_ += other.unzoned_;
}

WeeklyHistogram HistogramAccumulator::make_histogram(std::string id,
                                                     const std::vector<std::uint64_t>& counts) const {
  WeeklyHistogram h{std::move(id), spec_, counts, occurrences_, std::vector<double>(spec_.bins(), 0.0)};
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (occurrences_[i] > 0) {
      h.mu[i] = static_cast<double>(counts[i]) / static_cast<double>(occurrences_[i]);
    }
  }
  return h;
}

std::map<std::string, WeeklyHistogram> HistogramAccumulator::finalize() const {
  std::map<std::string, WeeklyHistogram> out;
  for (const auto& [zone, counts] : counts_) out.emplace(zone, make_histogram(zone, counts));
  return out;
}

WeeklyHistogram HistogramAccumulator::finalize_total(std::string id) const {
  std::vector<std::uint64_t> total(spec_.bins(), 0);
  for (const auto& [zone, counts] : counts_) {
    for (std::size_t i = 0; i < counts.size(); ++i) total[i] += counts[i];
  }
  return make_histogram(std::move(id), total);
}

std::map<std::string, WeeklyHistogram> accumulate(std::span<const ZonedRecord> records,
                                                  const BinningSpec& spec, const DateRange& span,
                                                  const TzTable& tz) {
  HistogramAccumulator acc(spec, span, tz);
  acc.add_all(records);
  return acc.finalize();
}

DateRange covering_span(std::span<const ZonedRecord> records, const TzTable& tz) {
  if (records.empty()) throw Error(ErrorCode::usage, "cannot derive a span from an empty stream");
  std::int64_t lo = std::numeric_limits<std::int64_t>::max();
  std::int64_t hi = std::numeric_limits<std::int64_t>::min();
  for (const auto& r : records) {
    const std::int64_t day = floor_div(tz.to_local(r.record.timestamp_utc), kSecondsPerDay);
    lo = std::min(lo, day);
    hi = std::max(hi, day);
  }
  return {lo, hi + 1};
}

Signature normalize(const WeeklyHistogram& hist) {
  double sum = 0.0;
  for (double m : hist.mu) sum += m;
  if (!(sum > 0.0)) {
    throw Error(ErrorCode::empty_zone, "zone '" + hist.zone_id + "' has no activity");
  }
  Signature s{hist.zone_id, hist.spec, std::vector<double>(hist.mu.size()), hist.total(), 0.0, true};
  for (std::size_t i = 0; i < hist.mu.size(); ++i) {
    s.T[i] = hist.mu[i] / sum;
    s.max_share = std::max(s.max_share, s.T[i]);
  }
  s.valid = !hist.spec.has_validity_rule() || s.max_share <= kMaxBinShare;
  return s;
}

std::vector<Signature> normalize_all(const std::map<std::string, WeeklyHistogram>& hists) {
  std::vector<Signature> out;
  out.reserve(hists.size());
  for (const auto& [zone, h] : hists) {
    if (h.total() == 0) continue;
    out.push_back(normalize(h));
  }
  return out;
}

std::vector<std::string> top_apps(std::span<const ZonedRecord> records, std::size_t top_k) {
  std::unordered_map<std::string_view, std::uint64_t> counts;
  for (const auto& r : records) ++counts[r.record.app_name];
  if (counts.size() < top_k) {
    throw Error(ErrorCode::config, "need at least " + std::to_string(top_k) + " apps, found " +
                                       std::to_string(counts.size()));
  }
  std::vector<std::pair<std::string_view, std::uint64_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < top_k; ++i) out.emplace_back(ranked[i].first);
  return out;
}

std::map<std::string, AppSignatureMatrix> per_app_signatures(std::span<const ZonedRecord> records,
                                                             const BinningSpec& spec,
                                                             const DateRange& span,
                                                             const TzTable& tz, std::size_t top_k) {
  const auto apps = top_apps(records, top_k);
  std::vector<HistogramAccumulator> accs;
  accs.reserve(apps.size());
  for (std::size_t a = 0; a < apps.size(); ++a) accs.emplace_back(spec, span, tz);
  std::unordered_map<std::string_view, std::size_t> app_slot;
  for (std::size_t a = 0; a < apps.size(); ++a) app_slot.emplace(apps[a], a);
  for (const auto& r : records) {
    auto it = app_slot.find(r.record.app_name);
    if (it != app_slot.end()) accs[it->second].add(r);
  }

  std::vector<std::map<std::string, WeeklyHistogram>> per_app;
  for (const auto& acc : accs) per_app.push_back(acc.finalize());

  std::map<std::string, AppSignatureMatrix> out;
  for (const auto& [zone, first] : per_app.front()) {
    AppSignatureMatrix m{zone, spec, apps, {}};
    m.features.reserve(apps.size() * spec.bins());
    bool keep = true;
    for (std::size_t a = 0; a < apps.size() && keep; ++a) {
      auto it = per_app[a].find(zone);
      if (it == per_app[a].end() || it->second.total() == 0) {
        keep = false;
        break;
      }
      const Signature s = normalize(it->second);
      if (!s.valid) {
        keep = false;
        break;
      }
      m.features.insert(m.features.end(), s.T.begin(), s.T.end());
    }
    if (keep) out.emplace(zone, std::move(m));
  }
  return out;
}

void write_signatures_csv(std::ostream& out, std::span<const Signature> signatures) {
  csv::Writer w(out);
  const std::size_t n = signatures.empty() ? 0 : signatures.front().T.size();
  w.field("zone_id");
  for (std::size_t i = 0; i < n; ++i) w.field("T_" + std::to_string(i));
  w.end_row();
  for (const auto& s : signatures) {
    w.field(s.zone_id);
    for (double v : s.T) w.field(v);
    w.end_row();
  }
}

FeatureTable read_feature_csv(std::istream& in) {
  csv::Reader reader(in);
  std::vector<std::string> row;
  if (!reader.next(row) || row.empty() || row[0] != "zone_id") {
    throw Error(ErrorCode::validation, "feature CSV: header must start with zone_id");
  }
  FeatureTable t;
  t.columns.assign(row.begin() + 1, row.end());
  t.values = Matrix(0, t.columns.size());
  std::vector<double> values(t.columns.size());
  while (reader.next(row)) {
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != t.columns.size() + 1) {
      throw Error(ErrorCode::validation, "feature CSV line " + std::to_string(reader.line()) +
                                             ": expected " + std::to_string(t.columns.size() + 1) +
                                             " fields");
    }
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = parse_double(row[i + 1], "feature CSV");
    t.zones.push_back(row[0]);
    t.values.append_row(values);
  }
  return t;
}

std::vector<Signature> read_signatures_csv(std::istream& in) {
  FeatureTable t = read_feature_csv(in);
  if (t.columns.empty() || kMinutesPerWeek % static_cast<std::int64_t>(t.columns.size()) != 0) {
    throw Error(ErrorCode::validation, "signature CSV: bin count does not divide the week");
  }
  const BinningSpec spec(static_cast<int>(kMinutesPerWeek / static_cast<std::int64_t>(t.columns.size())));
  std::vector<Signature> out;
  for (std::size_t r = 0; r < t.zones.size(); ++r) {
    auto row = t.values.row(r);
    Signature s{t.zones[r], spec, std::vector<double>(row.begin(), row.end()), 0, 0.0, true};
    s.max_share = *std::max_element(s.T.begin(), s.T.end());
    out.push_back(std::move(s));
  }
  return out;
}

void write_signature_meta_csv(std::ostream& out, std::span<const Signature> signatures) {
  csv::Writer w(out);
  w.row({"zone_id", "total_tweets", "max_share", "valid"});
  for (const auto& s : signatures) {
    w.field(s.zone_id).field(s.total_tweets).field(s.max_share).field(s.valid);
    w.end_row();
  }
}

void write_histograms_csv(std::ostream& out, const std::map<std::string, WeeklyHistogram>& hists) {
  csv::Writer w(out);
  const std::size_t n = hists.empty() ? 0 : hists.begin()->second.mu.size();
  w.field("zone_id").field("total");
  for (std::size_t i = 0; i < n; ++i) w.field("mu_" + std::to_string(i));
  w.end_row();
  for (const auto& [zone, h] : hists) {
    w.field(zone).field(h.total());
    for (double v : h.mu) w.field(v);
    w.end_row();
  }
}

std::map<std::string, WeeklyHistogram> read_histograms_csv(std::istream& in) {
  FeatureTable t = read_feature_csv(in);
  if (t.columns.size() < 2 || t.columns[0] != "total") {
    throw Error(ErrorCode::validation, "histogram CSV: expected zone_id,total,mu_0,...");
  }
  const std::size_t n = t.columns.size() - 1;
  if (kMinutesPerWeek % static_cast<std::int64_t>(n) != 0) {
    throw Error(ErrorCode::validation, "histogram CSV: bin count does not divide the week");
  }
  const BinningSpec spec(static_cast<int>(kMinutesPerWeek / static_cast<std::int64_t>(n)));
  std::map<std::string, WeeklyHistogram> out;
  for (std::size_t r = 0; r < t.zones.size(); ++r) {
    auto row = t.values.row(r);
    WeeklyHistogram h{t.zones[r], spec, std::vector<std::uint64_t>(n, 0), std::vector<std::uint64_t>(n, 0),
                      std::vector<double>(row.begin() + 1, row.end())};
    h.counts[0] = static_cast<std::uint64_t>(row[0]);  // only the total survives the round trip
    out.emplace(h.zone_id, std::move(h));
  }
  return out;
}

void write_app_signatures_csv(std::ostream& out,
                              const std::map<std::string, AppSignatureMatrix>& matrices) {
  csv::Writer w(out);
  w.field("zone_id");
  if (!matrices.empty()) {
    const auto& first = matrices.begin()->second;
    for (const auto& app : first.apps) {
      for (std::size_t i = 0; i < first.spec.bins(); ++i) w.field(app + ":T_" + std::to_string(i));
    }
  }
  w.end_row();
  for (const auto& [zone, m] : matrices) {
    w.field(zone);
    for (double v : m.features) w.field(v);
    w.end_row();
  }
}

Matrix signature_matrix(std::span<const Signature> signatures) {
  Matrix m;
  for (const auto& s : signatures) {
    if (s.valid) m.append_row(s.T);
  }
  return m;
}

}  // namespace tws
