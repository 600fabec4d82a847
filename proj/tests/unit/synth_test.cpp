#include <doctest.h>

#include <cmath>
#include <sstream>

#include "tws/botfilter.hpp"
#include "tws/error.hpp"
#include "tws/parallel.hpp"
#include "tws/signature.hpp"
#include "tws/synth.hpp"

using namespace tws;

namespace {

synth::SynthSpec single_zone(std::vector<double> profile, double rate, std::size_t weeks) {
  synth::SynthSpec s;
  s.seed = 4;
  s.archetypes = {{"flat", std::move(profile)}};
  s.zone_archetype = {0};
  s.apps = {{"A", 1.0, 0.0, 12.0, 500}};
  s.weeks = weeks;
  s.base_rate = rate;
  return s;
}

double l1(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

synth::SynthSpec small_reference() {
  auto s = synth::reference_spec(77);
  s.grid_rows = 3;
  s.grid_cols = 4;
  s.zone_archetype.resize(12);
  s.weeks = 2;
  s.base_rate = 2000;
  s.events = {{{"Z001", "Z007"}, 1, {4, 5}, 3.0}};
  return s;
}

}  // namespace

TEST_CASE("synth: zero rate and no bots yields an empty stream") {
  auto s = single_zone(synth::uniform_profile(), 0.0, 2);
  const auto m = synth::generate(s, [](const EventRecord&) { FAIL("unexpected record"); });
  CHECK(m.records_total == 0);
}

TEST_CASE("synth: uniform archetype at a high rate gives a uniform signature") {
  const auto s = single_zone(synth::uniform_profile(), 400000, 4);
  const auto zones = ZoneSet(synth::tessellation(s));
  HistogramAccumulator acc(BinningSpec::quarter_hour(), synth::span(s), synth::tz(s));
  std::size_t unzoned = 0;
  synth::generate(s, [&](const EventRecord& r) {
    const auto z = assign(r, zones);
    if (!z) ++unzoned;
    else acc.add(*z, r.timestamp_utc);
  });
  CHECK(unzoned == 0);
  CHECK(acc.skipped_outside_span() == 0);
  const auto sig = normalize(acc.finalize().begin()->second);
  CHECK(l1(sig.T, std::vector<double>(672, 1.0 / 672)) <= 0.02);
}

TEST_CASE("synth: per-app signatures recover the generating shapes") {
  auto ref = synth::reference_spec();
  auto s = single_zone(ref.archetypes[0].profile, 200000, 4);
  s.apps = {{"Day", 1.0, 0.8, 13.0, 3000}, {"Night", 1.0, 0.8, 1.0, 3000}};
  const auto zones = ZoneSet(synth::tessellation(s));
  const auto records = assign_all(synth::generate_records(s), zones);
  const auto m = per_app_signatures(records, BinningSpec::quarter_hour(), synth::span(s), synth::tz(s), 2);
  REQUIRE(m.size() == 1);
  const auto& mat = m.begin()->second;
  for (std::size_t a = 0; a < 2; ++a) {
    const std::size_t app = mat.apps[a] == "Day" ? 0 : 1;
    const auto expected = synth::expected_app_profile(s, 0, app);
    const std::vector<double> got(mat.features.begin() + static_cast<std::ptrdiff_t>(a * 672),
                                  mat.features.begin() + static_cast<std::ptrdiff_t>((a + 1) * 672));
    CHECK(l1(got, expected) <= 0.05);
  }
}

TEST_CASE("synth: same seed gives identical bytes regardless of threads") {
  const auto s = small_reference();
  std::ostringstream a, b, c;
  set_thread_count(1);
  const auto ma = synth::generate_ndjson(s, a);
  set_thread_count(7);
  const auto mb = synth::generate_ndjson(s, b);
  set_thread_count(0);
  const auto mc = synth::generate_ndjson(s, c);
  CHECK(a.str() == b.str());
  CHECK(a.str() == c.str());
  CHECK(synth::to_json(ma).dump() == synth::to_json(mb).dump());
  CHECK(ma.records_total > 0);

  auto other = s;
  other.seed = 78;
  std::ostringstream d;
  synth::generate_ndjson(other, d);
  CHECK(d.str() != a.str());
}

TEST_CASE("synth: spec json round trip and validation") {
  const auto s = small_reference();
  const auto back = synth::spec_from_json(synth::to_json(s));
  CHECK(synth::to_json(back) == synth::to_json(s));
  auto bad = s;
  bad.start_date = "2015-01-06";
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = s;
  bad.events[0].zones = {"nowhere"};
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = s;
  bad.jitter = 0.4;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("synth: every generated point lies in its tessellation") {
  const auto s = small_reference();
  const ZoneSet zones(synth::tessellation(s));
  CHECK(zones.size() == 12);
  std::size_t n = 0, unzoned = 0;
  synth::generate(s, [&](const EventRecord& r) {
    ++n;
    if (!assign(r, zones)) ++unzoned;
  });
  CHECK(n > 0);
  CHECK(unzoned == 0);
  const auto geo = synth::tessellation_geojson(s);
  CHECK(ZoneSet::from_geojson(geo, "zone_id").size() == 12);
}

TEST_CASE("synth: planted bots are dropped and humans kept at reference scale") {
  const auto s = synth::reference_spec();
  AppCensus census;
  const auto m = synth::generate(s, [&](const EventRecord& r) { census.add(r); });
  const auto verdicts = judge_apps(census.table());
  for (const auto& v : verdicts) {
    INFO(v.app_name);
    const bool is_bot = std::find(m.bot_apps.begin(), m.bot_apps.end(), v.app_name) != m.bot_apps.end();
    CHECK(v.dropped == is_bot);
  }
  const double bot_share = static_cast<double>(m.records_by_app.at("TweetMyJOBS")) /
                           static_cast<double>(m.records_total);
  CHECK(bot_share == doctest::Approx(0.005).epsilon(0.1));
  CHECK(m.zone_ids.size() == 120);
  CHECK(m.archetype_names.size() == 7);
}

TEST_CASE("synth: zone targets cover every zone") {
  const auto s = small_reference();
  const auto t = synth::zone_targets(s);
  CHECK(t.names == std::vector<std::string>{"residential_pct", "control"});
  CHECK(t.by_zone.size() == 12);
  for (const auto& [zone, v] : t.by_zone) {
    CHECK(v[0] >= 0.0);
    CHECK(v[0] <= 100.0);
  }
}

TEST_CASE("synth: planted regression fixture") {
  const auto p = synth::plant_regression(500, 28, 3);
  CHECK(p.features.values.rows() == 500);
  CHECK(p.features.values.cols() == 28);
  CHECK(p.informative.size() == 5);
  double mean = 0, var = 0;
  for (double v : p.signal) mean += v;
  mean /= 500;
  for (double v : p.signal) var += (v - mean) * (v - mean);
  var /= 500;
  // Noise sized for a signal share of 0.85.
  CHECK(var / (var + p.noise_sd * p.noise_sd) == doctest::Approx(0.85).epsilon(1e-9));
  for (std::size_t i = 0; i < 500; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < 28; ++j) s += p.features.values(i, j);
    CHECK(s == doctest::Approx(1.0));
  }
}
