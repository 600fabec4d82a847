#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tws/civil_time.hpp"
#include "tws/geozone.hpp"
#include "tws/random.hpp"
#include "tws/record.hpp"
#include "tws/regress.hpp"
#include "tws/signature.hpp"

namespace tws::synth {

inline constexpr std::size_t kProfileBins = 672;

/// Gaussian bump in local time of day, repeated on the weekdays with a
/// nonzero weight (Monday first).
struct Bump {
  std::array<double, 7> days{1, 1, 1, 1, 1, 1, 1};
  double hour = 12.0;
  double width_hours = 1.0;
  double height = 1.0;
};

/// 672-bin weekly profile summing to 1: a flat floor plus bumps.
std::vector<double> make_profile(double floor, const std::vector<Bump>& bumps);
std::vector<double> uniform_profile();

struct Archetype {
  std::string name;
  std::vector<double> profile;  // 672 values summing to 1
};

/// Human app. Its share of a zone's activity in bin b is proportional to
/// weight * (1 + amplitude * cos(2 pi (hour(b) - peak_hour) / 24)); shares
/// are renormalized per bin so the apps together follow the archetype.
struct AppSpec {
  std::string name;
  double weight = 1.0;
  double amplitude = 0.0;
  double peak_hour = 12.0;
  std::size_t users = 1000;
};

/// Automated app posting uniformly over the week. A `dominant_share` of its
/// records comes from one account, the rest from `users - 1` others.
struct BotSpec {
  std::string name;
  std::size_t users = 10;
  double rate = 0.0;  // records per zone per week
  double dominant_share = 0.6;
};

/// Multiplies human activity in the listed 6-hour bins of one week.
struct EventSpec {
  std::vector<std::string> zones;
  std::size_t week = 0;
  std::vector<std::size_t> bins;  // 6-hour bin indices, 0..27
  double multiplier = 3.0;
};

struct SynthSpec {
  std::uint64_t seed = 1;
  // Grid tessellation: rows x cols jittered quadrilaterals.
  std::size_t grid_rows = 1;
  std::size_t grid_cols = 1;
  double origin_lon = -74.05;
  double origin_lat = 40.60;
  double cell_degrees = 0.01;
  double jitter = 0.2;  // fraction of a cell by which inner vertices move
  std::vector<Archetype> archetypes;
  std::vector<std::size_t> zone_archetype;  // per zone, row-major grid order
  std::vector<AppSpec> apps;
  std::size_t weeks = 1;
  std::string start_date = "2015-01-05";  // must be a Monday
  std::int64_t utc_offset = 0;            // seconds, local = utc + offset
  double base_rate = 0.0;                 // human records per zone per week
  std::vector<BotSpec> bots;
  std::vector<EventSpec> events;

  std::size_t zone_count() const noexcept { return grid_rows * grid_cols; }
  /// Throws Error(config) on any violated invariant.
  void validate() const;
};

std::string zone_name(std::size_t index, std::size_t zone_count);

/// 7 archetypes, 120 zones, 8 weeks, four human apps, one bot app at about
/// 0.5% of the volume and x3 events in two consecutive 6-hour bins of 20% of
/// the zones during the last week. Roughly one million records.
SynthSpec reference_spec(std::uint64_t seed = 20150105);

nlohmann::json to_json(const SynthSpec& spec);
SynthSpec spec_from_json(const nlohmann::json& doc);

/// The tessellation as zones (ids from zone_name) and as GeoJSON with a
/// `zone_id` property.
std::vector<Zone> tessellation(const SynthSpec& spec);
nlohmann::json tessellation_geojson(const SynthSpec& spec);

/// Local-time span covered by the spec's weeks.
DateRange span(const SynthSpec& spec);
TzTable tz(const SynthSpec& spec);

/// Expected 672-bin signature of one human app inside one archetype.
std::vector<double> expected_app_profile(const SynthSpec& spec, std::size_t archetype, std::size_t app);

struct EventMask {
  std::string zone_id;
  std::size_t week = 0;
  std::int64_t week_start_day = 0;
  std::vector<std::size_t> bins;
  double multiplier = 1.0;
};

struct Manifest {
  std::uint64_t seed = 0;
  std::vector<std::string> zone_ids;
  std::vector<std::size_t> zone_archetype;
  std::vector<std::string> archetype_names;
  std::vector<std::string> human_apps;
  std::vector<std::string> bot_apps;
  std::vector<EventMask> events;
  DateRange span;
  std::uint64_t records_total = 0;
  std::map<std::string, std::uint64_t> records_by_app;
};

nlohmann::json to_json(const Manifest& manifest);

/// Streams records to `sink` in zone order. Zones are generated in parallel
/// from per-zone derived seeds, so output does not depend on the worker count.
Manifest generate(const SynthSpec& spec, const std::function<void(const EventRecord&)>& sink);
Manifest generate_ndjson(const SynthSpec& spec, std::ostream& out);
std::vector<EventRecord> generate_records(const SynthSpec& spec, Manifest* manifest = nullptr);

/// Zone-level targets keyed like the tessellation: "residential_pct" is a
/// per-archetype level plus noise, "control" is pure noise.
TargetTable zone_targets(const SynthSpec& spec);

/// Poisson variate from the library's own uniform source (portable across
/// standard library implementations).
std::uint64_t poisson(Rng& rng, double mean);
double standard_normal(Rng& rng);

/// Regression fixture: n rows of d-bin signature-like features and a target
/// that is an additive nonlinear function of five features (two of them
/// dominant) plus Gaussian noise sized so that the best achievable R^2 is
/// `ceiling`.
struct PlantedRegression {
  FeatureTable features;
  TargetTable targets;           // single target "planted"
  std::vector<double> signal;    // noise-free target
  std::vector<std::size_t> informative;
  double noise_sd = 0.0;
};

PlantedRegression plant_regression(std::size_t n, std::size_t d, std::uint64_t seed, double ceiling = 0.85);

}  // namespace tws::synth
