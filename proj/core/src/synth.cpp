#include "tws/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>
#include <tuple>

#include "tws/error.hpp"
#include "tws/ingest.hpp"
#include "tws/parallel.hpp"

namespace tws::synth {
namespace {

constexpr std::size_t kBinsPerDay = 96;
constexpr std::size_t kSixHourWidth = 24;  // quarter hours per 6-hour bin
constexpr std::size_t kZonesPerBatch = 16;

// Salts for the independent random streams.
constexpr std::uint64_t kStreamTessellation = 1;
constexpr std::uint64_t kStreamZone = 2;
constexpr std::uint64_t kStreamLabels = 3;
constexpr std::uint64_t kStreamEvents = 4;

double bin_hour(std::size_t bin) {
  return static_cast<double>(bin % kBinsPerDay) * 0.25 + 0.125;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw Error(ErrorCode::config, "synth spec: " + message);
}

// Per-bin shares of the human apps; each column sums to 1.
std::vector<std::vector<double>> app_shares(const SynthSpec& spec) {
  std::vector<std::vector<double>> shares(spec.apps.size(), std::vector<double>(kProfileBins));
  for (std::size_t b = 0; b < kProfileBins; ++b) {
    double total = 0.0;
    for (std::size_t a = 0; a < spec.apps.size(); ++a) {
      const auto& app = spec.apps[a];
      const double phase = 2.0 * std::numbers::pi * (bin_hour(b) - app.peak_hour) / 24.0;
      shares[a][b] = app.weight * (1.0 + app.amplitude * std::cos(phase));
      total += shares[a][b];
    }
    for (auto& s : shares) s[b] = total > 0.0 ? s[b] / total : 0.0;
  }
  return shares;
}

std::int64_t start_day(const SynthSpec& spec) { return parse_date(spec.start_date); }

}  // namespace

std::vector<double> make_profile(double floor, const std::vector<Bump>& bumps) {
  std::vector<double> p(kProfileBins, floor);
  for (std::size_t b = 0; b < kProfileBins; ++b) {
    const double t = static_cast<double>(b) * 0.25 + 0.125;  // hours since Monday 00:00
    for (const auto& bump : bumps) {
      for (std::size_t day = 0; day < 7; ++day) {
        if (bump.days[day] == 0.0) continue;
        double dt = std::fabs(t - (static_cast<double>(day) * 24.0 + bump.hour));
        dt = std::min(dt, 168.0 - dt);
        p[b] += bump.days[day] * bump.height * std::exp(-0.5 * dt * dt / (bump.width_hours * bump.width_hours));
      }
    }
  }
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  require(total > 0.0, "profile is identically zero");
  for (auto& v : p) v /= total;
  return p;
}

std::vector<double> uniform_profile() { return std::vector<double>(kProfileBins, 1.0 / kProfileBins); }

void SynthSpec::validate() const {
  require(grid_rows > 0 && grid_cols > 0, "grid must have at least one zone");
  require(cell_degrees > 0.0 && std::isfinite(cell_degrees), "cell_degrees must be positive");
  require(jitter >= 0.0 && jitter <= 0.25, "jitter must lie in [0, 0.25]");
  require(!archetypes.empty(), "at least one archetype is required");
  for (const auto& a : archetypes) {
    require(a.profile.size() == kProfileBins, "archetype '" + a.name + "' needs 672 values");
    double s = 0.0;
    for (double v : a.profile) {
      require(v >= 0.0 && std::isfinite(v), "archetype '" + a.name + "' has a negative value");
      s += v;
    }
    require(std::fabs(s - 1.0) <= 1e-9, "archetype '" + a.name + "' does not sum to 1");
  }
  require(zone_archetype.size() == zone_count(), "zone_archetype needs one entry per zone");
  for (auto z : zone_archetype) require(z < archetypes.size(), "zone_archetype index out of range");
  require(base_rate >= 0.0 && std::isfinite(base_rate), "base_rate must be >= 0");
  require(base_rate == 0.0 || !apps.empty(), "a positive base_rate needs at least one app");
  std::set<std::string> names;
  for (const auto& a : apps) {
    require(!a.name.empty() && names.insert(a.name).second, "app names must be unique and non-empty");
    require(a.weight >= 0.0 && a.users > 0, "app '" + a.name + "' needs weight >= 0 and users > 0");
    require(a.amplitude >= 0.0 && a.amplitude <= 1.0, "app '" + a.name + "' amplitude must lie in [0, 1]");
  }
  for (const auto& b : bots) {
    require(!b.name.empty() && names.insert(b.name).second, "bot names must be unique and distinct from apps");
    require(b.rate >= 0.0 && b.users > 0, "bot '" + b.name + "' needs rate >= 0 and users > 0");
    require(b.dominant_share >= 0.0 && b.dominant_share <= 1.0, "bot '" + b.name + "' dominant_share in [0, 1]");
  }
  require(weeks > 0, "weeks must be positive");
  require(weekday_from_days(start_day(*this)) == 0, "start_date must be a Monday");
  require(utc_offset % 900 == 0, "utc_offset must be a multiple of 15 minutes");
  std::set<std::string> zone_ids;
  for (std::size_t z = 0; z < zone_count(); ++z) zone_ids.insert(zone_name(z, zone_count()));
  for (const auto& e : events) {
    require(e.week < weeks, "event week out of range");
    require(e.multiplier >= 0.0, "event multiplier must be >= 0");
    for (auto b : e.bins) require(b < 28, "event bins are 6-hour bins 0..27");
    for (const auto& z : e.zones) require(zone_ids.contains(z), "event zone '" + z + "' does not exist");
  }
}

std::string zone_name(std::size_t index, std::size_t zone_count) {
  const std::size_t width = std::max<std::size_t>(3, std::to_string(zone_count).size());
  std::string digits = std::to_string(index + 1);
  return "Z" + std::string(width - std::min(width, digits.size()), '0') + digits;
}

SynthSpec reference_spec(std::uint64_t seed) {
  SynthSpec s;
  s.seed = seed;
  s.grid_rows = 10;
  s.grid_cols = 12;
  s.weeks = 8;
  s.start_date = "2015-01-05";
  s.utc_offset = -5 * 3600;
  s.base_rate = 1040.0;

  const std::array<double, 7> all{1, 1, 1, 1, 1, 1, 1};
  const std::array<double, 7> workdays{1, 1, 1, 1, 1, 0, 0};
  const std::array<double, 7> weekend{0, 0, 0, 0, 0, 1, 1};
  s.archetypes = {
      {"residential", make_profile(0.023, {{all, 21.5, 1.5, 1.0}})},
      {"nightlife", make_profile(0.052, {{weekend, 1.5, 1.2, 1.0}})},
      {"business", make_profile(0.050, {{workdays, 12.5, 1.0, 1.0}})},
      {"retail", make_profile(0.052, {{weekend, 16.0, 2.0, 1.0}})},
      {"transit", make_profile(0.034, {{workdays, 8.0, 0.8, 1.0}, {workdays, 18.0, 0.8, 1.0}})},
      {"leisure", make_profile(0.053, {{weekend, 11.0, 1.5, 1.0}})},
      {"campus", make_profile(0.030, {{{1, 1, 1, 1, 0, 0, 0}, 9.5, 1.0, 1.0}, {{1, 1, 1, 1, 0, 0, 0}, 15.0, 1.0, 1.0}})},
  };

  const std::size_t n = s.zone_count();
  s.zone_archetype.resize(n);
  for (std::size_t z = 0; z < n; ++z) s.zone_archetype[z] = z % s.archetypes.size();
  Rng label_rng = make_rng(seed, {kStreamLabels});
  for (std::size_t i = n; i > 1; --i) std::swap(s.zone_archetype[i - 1], s.zone_archetype[uniform_index(label_rng, i)]);

  s.apps = {
      {"Twitter for iPhone", 0.45, 0.3, 21.0, 20000},
      {"Twitter for Android", 0.30, 0.3, 9.0, 15000},
      {"Instagram", 0.15, 0.5, 15.0, 8000},
      {"Foursquare", 0.10, 0.6, 12.0, 4000},
  };
  s.bots = {{"TweetMyJOBS", 12, s.base_rate * 0.005 / 0.995, 0.7}};

  // x3 in two consecutive 6-hour bins of 20% of the zones, last week.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng event_rng = make_rng(seed, {kStreamEvents});
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(event_rng, i)]);
  const std::size_t n_events = n / 5;
  std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_events));
  for (std::size_t i = 0; i < n_events; ++i) {
    const std::size_t first = uniform_index(event_rng, 27);
    s.events.push_back({{zone_name(order[i], n)}, s.weeks - 1, {first, first + 1}, 3.0});
  }
  return s;
}

// -- JSON -----------------------------------------------------------------------

nlohmann::json to_json(const SynthSpec& s) {
  nlohmann::ordered_json j;
  j["seed"] = s.seed;
  j["grid"] = {{"rows", s.grid_rows}, {"cols", s.grid_cols}, {"origin_lon", s.origin_lon},
               {"origin_lat", s.origin_lat}, {"cell_degrees", s.cell_degrees}, {"jitter", s.jitter}};
  j["weeks"] = s.weeks;
  j["start_date"] = s.start_date;
  j["utc_offset"] = s.utc_offset;
  j["base_rate"] = s.base_rate;
  j["archetypes"] = nlohmann::ordered_json::array();
  for (const auto& a : s.archetypes) j["archetypes"].push_back({{"name", a.name}, {"profile", a.profile}});
  j["zone_archetype"] = s.zone_archetype;
  j["apps"] = nlohmann::ordered_json::array();
  for (const auto& a : s.apps) {
    j["apps"].push_back({{"name", a.name}, {"weight", a.weight}, {"amplitude", a.amplitude},
                         {"peak_hour", a.peak_hour}, {"users", a.users}});
  }
  j["bots"] = nlohmann::ordered_json::array();
  for (const auto& b : s.bots) {
    j["bots"].push_back({{"name", b.name}, {"users", b.users}, {"rate", b.rate}, {"dominant_share", b.dominant_share}});
  }
  j["events"] = nlohmann::ordered_json::array();
  for (const auto& e : s.events) {
    j["events"].push_back({{"zones", e.zones}, {"week", e.week}, {"bins", e.bins}, {"multiplier", e.multiplier}});
  }
  return nlohmann::json::parse(j.dump());
}

SynthSpec spec_from_json(const nlohmann::json& j) {
  try {
    SynthSpec s;
    s.seed = j.at("seed").get<std::uint64_t>();
    const auto& g = j.at("grid");
    s.grid_rows = g.at("rows").get<std::size_t>();
    s.grid_cols = g.at("cols").get<std::size_t>();
    s.origin_lon = g.value("origin_lon", s.origin_lon);
    s.origin_lat = g.value("origin_lat", s.origin_lat);
    s.cell_degrees = g.value("cell_degrees", s.cell_degrees);
    s.jitter = g.value("jitter", s.jitter);
    s.weeks = j.at("weeks").get<std::size_t>();
    s.start_date = j.value("start_date", s.start_date);
    s.utc_offset = j.value("utc_offset", std::int64_t{0});
    s.base_rate = j.at("base_rate").get<double>();
    for (const auto& a : j.at("archetypes")) {
      s.archetypes.push_back({a.at("name").get<std::string>(), a.at("profile").get<std::vector<double>>()});
    }
    s.zone_archetype = j.at("zone_archetype").get<std::vector<std::size_t>>();
    for (const auto& a : j.value("apps", nlohmann::json::array())) {
      s.apps.push_back({a.at("name").get<std::string>(), a.value("weight", 1.0), a.value("amplitude", 0.0),
                        a.value("peak_hour", 12.0), a.value("users", std::size_t{1000})});
    }
    for (const auto& b : j.value("bots", nlohmann::json::array())) {
      s.bots.push_back({b.at("name").get<std::string>(), b.value("users", std::size_t{10}), b.at("rate").get<double>(),
                        b.value("dominant_share", 0.6)});
    }
    for (const auto& e : j.value("events", nlohmann::json::array())) {
      s.events.push_back({e.at("zones").get<std::vector<std::string>>(), e.at("week").get<std::size_t>(),
                          e.at("bins").get<std::vector<std::size_t>>(), e.value("multiplier", 3.0)});
    }
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::config, std::string("synth spec: ") + e.what());
  }
}

nlohmann::json to_json(const Manifest& m) {
  nlohmann::ordered_json j;
  j["seed"] = m.seed;
  j["span"] = format_date(m.span.first_day) + ".." + format_date(m.span.end_day);
  j["archetypes"] = m.archetype_names;
  j["zones"] = nlohmann::ordered_json::array();
  for (std::size_t z = 0; z < m.zone_ids.size(); ++z) {
    j["zones"].push_back({{"zone_id", m.zone_ids[z]},
                          {"archetype", m.zone_archetype[z]},
                          {"archetype_name", m.archetype_names[m.zone_archetype[z]]}});
  }
  j["human_apps"] = m.human_apps;
  j["bot_apps"] = m.bot_apps;
  j["events"] = nlohmann::ordered_json::array();
  for (const auto& e : m.events) {
    j["events"].push_back({{"zone_id", e.zone_id},
                           {"week", e.week},
                           {"week_start", format_date(e.week_start_day)},
                           {"bins_6h", e.bins},
                           {"multiplier", e.multiplier}});
  }
  j["records_total"] = m.records_total;
  j["records_by_app"] = m.records_by_app;
  return nlohmann::json::parse(j.dump());
}

// -- geometry -------------------------------------------------------------------

std::vector<Zone> tessellation(const SynthSpec& spec) {
  const std::size_t R = spec.grid_rows, C = spec.grid_cols;
  std::vector<Point> vertex((R + 1) * (C + 1));
  for (std::size_t i = 0; i <= R; ++i) {
    for (std::size_t j = 0; j <= C; ++j) {
      Point p{spec.origin_lon + static_cast<double>(j) * spec.cell_degrees,
              spec.origin_lat + static_cast<double>(i) * spec.cell_degrees};
      if (i > 0 && i < R && j > 0 && j < C) {
        Rng rng = make_rng(spec.seed, {kStreamTessellation, i, j});
        p.x += (uniform01(rng) - 0.5) * 2.0 * spec.jitter * spec.cell_degrees;
        p.y += (uniform01(rng) - 0.5) * 2.0 * spec.jitter * spec.cell_degrees;
      }
      vertex[i * (C + 1) + j] = p;
    }
  }
  std::vector<Zone> zones;
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t c = 0; c < C; ++c) {
      const auto v = [&](std::size_t i, std::size_t j) { return vertex[i * (C + 1) + j]; };
      Zone z;
      z.id = zone_name(r * C + c, R * C);
      z.rings.push_back({v(r, c), v(r, c + 1), v(r + 1, c + 1), v(r + 1, c), v(r, c)});
      zones.push_back(std::move(z));
    }
  }
  return zones;
}

nlohmann::json tessellation_geojson(const SynthSpec& spec) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& z : tessellation(spec)) {
    nlohmann::json ring = nlohmann::json::array();
    for (const auto& p : z.rings.front()) ring.push_back({p.x, p.y});
    features.push_back({{"type", "Feature"},
                        {"properties", {{"zone_id", z.id}}},
                        {"geometry", {{"type", "Polygon"}, {"coordinates", {ring}}}}});
  }
  return {{"type", "FeatureCollection"}, {"features", features}};
}

DateRange span(const SynthSpec& spec) {
  const std::int64_t first = start_day(spec);
  return {first, first + 7 * static_cast<std::int64_t>(spec.weeks)};
}

TzTable tz(const SynthSpec& spec) { return TzTable(spec.utc_offset); }

std::vector<double> expected_app_profile(const SynthSpec& spec, std::size_t archetype, std::size_t app) {
  const auto shares = app_shares(spec);
  const auto& profile = spec.archetypes.at(archetype).profile;
  std::vector<double> p(kProfileBins);
  double total = 0.0;
  for (std::size_t b = 0; b < kProfileBins; ++b) {
    p[b] = profile[b] * shares.at(app)[b];
    total += p[b];
  }
  for (auto& v : p) v /= total;
  return p;
}

// -- sampling -------------------------------------------------------------------

std::uint64_t poisson(Rng& rng, double mean) {
  if (!(mean > 0.0)) return 0;
  if (mean < 10.0) {
    const double limit = std::exp(-mean);
    std::uint64_t k = 0;
    double prod = uniform01(rng);
    while (prod > limit) {
      ++k;
      prod *= uniform01(rng);
    }
    return k;
  }
  // Transformed rejection with squeeze (Hormann's PTRS).
  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = uniform01(rng) - 0.5;
    const double v = uniform01(rng);
    const double us = 0.5 - std::fabs(u);
    const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <= -mean + k * loglam - std::lgamma(k + 1.0)) {
      return static_cast<std::uint64_t>(k);
    }
  }
}

double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace {

struct ZoneBatch {
  std::vector<EventRecord> records;  // record_id filled at emission
};

class ZoneGenerator {
 public:
  explicit ZoneGenerator(const SynthSpec& spec)
      : spec_(spec), zones_(tessellation(spec)), index_(zones_), shares_(app_shares(spec)),
        first_day_(start_day(spec)), multipliers_(spec.zone_count()) {
    for (const auto& e : spec.events) {
      for (const auto& id : e.zones) {
        const std::size_t z = *index_.find(id);
        auto& m = multipliers_[z];
        if (m.empty()) m.assign(spec.weeks * 28, 1.0);
        for (auto b : e.bins) m[e.week * 28 + b] *= e.multiplier;
      }
    }
  }

  ZoneBatch run(std::size_t z) const {
    ZoneBatch out;
    Rng rng = make_rng(spec_.seed, {kStreamZone, z});
    const auto& profile = spec_.archetypes[spec_.zone_archetype[z]].profile;
    const std::size_t zi = *index_.find(zones_[z].id);
    const Zone& zone = index_.zone(zi);
    for (std::size_t w = 0; w < spec_.weeks; ++w) {
      const std::int64_t week_local = (first_day_ + 7 * static_cast<std::int64_t>(w)) * kSecondsPerDay;
      for (std::size_t b = 0; b < kProfileBins; ++b) {
        double rate = spec_.base_rate * profile[b];
        if (!multipliers_[z].empty()) rate *= multipliers_[z][w * 28 + b / kSixHourWidth];
        for (std::size_t a = 0; a < spec_.apps.size(); ++a) {
          const std::uint64_t n = poisson(rng, rate * shares_[a][b]);
          const auto& app = spec_.apps[a];
          for (std::uint64_t i = 0; i < n; ++i) {
            emit(out, rng, zone, zi, week_local, b, app.name,
                 app.name + "#" + std::to_string(uniform_index(rng, app.users)));
          }
        }
        for (const auto& bot : spec_.bots) {
          const std::uint64_t n = poisson(rng, bot.rate / static_cast<double>(kProfileBins));
          for (std::uint64_t i = 0; i < n; ++i) {
            std::size_t user = 0;
            if (bot.users > 1 && uniform01(rng) >= bot.dominant_share) user = 1 + uniform_index(rng, bot.users - 1);
            emit(out, rng, zone, zi, week_local, b, bot.name, bot.name + "#" + std::to_string(user));
          }
        }
      }
    }
    return out;
  }

 private:
  void emit(ZoneBatch& out, Rng& rng, const Zone& zone, std::size_t zi, std::int64_t week_local, std::size_t bin,
            const std::string& app, std::string user) const {
    EventRecord r;
    r.user_id = std::move(user);
    r.app_name = app;
    const std::int64_t local = week_local + static_cast<std::int64_t>(bin) * 900 +
                               static_cast<std::int64_t>(uniform_index(rng, 900));
    r.timestamp_utc = local - spec_.utc_offset;
    for (;;) {
      const Point p{zone.bbox.min_x + uniform01(rng) * (zone.bbox.max_x - zone.bbox.min_x),
                    zone.bbox.min_y + uniform01(rng) * (zone.bbox.max_y - zone.bbox.min_y)};
      if (!contains(zone, p)) continue;
      if (index_.assign_index(p) != zi) continue;
      r.lon = p.x;
      r.lat = p.y;
      break;
    }
    out.records.push_back(std::move(r));
  }

  const SynthSpec& spec_;
  std::vector<Zone> zones_;
  ZoneSet index_;
  std::vector<std::vector<double>> shares_;
  std::int64_t first_day_;
  std::vector<std::vector<double>> multipliers_;  // per zone: weeks x 28, empty when untouched
};

}  // namespace

Manifest generate(const SynthSpec& spec, const std::function<void(const EventRecord&)>& sink) {
  spec.validate();
  const ZoneGenerator gen(spec);
  const std::size_t n = spec.zone_count();

  Manifest m;
  m.seed = spec.seed;
  m.span = span(spec);
  for (std::size_t z = 0; z < n; ++z) m.zone_ids.push_back(zone_name(z, n));
  m.zone_archetype = spec.zone_archetype;
  for (const auto& a : spec.archetypes) m.archetype_names.push_back(a.name);
  for (const auto& a : spec.apps) {
    m.human_apps.push_back(a.name);
    m.records_by_app[a.name] = 0;
  }
  for (const auto& b : spec.bots) {
    m.bot_apps.push_back(b.name);
    m.records_by_app[b.name] = 0;
  }
  for (const auto& e : spec.events) {
    for (const auto& z : e.zones) {
      m.events.push_back({z, e.week, m.span.first_day + 7 * static_cast<std::int64_t>(e.week), e.bins, e.multiplier});
    }
  }
  std::sort(m.events.begin(), m.events.end(),
            [](const EventMask& a, const EventMask& b) { return std::tie(a.zone_id, a.week) < std::tie(b.zone_id, b.week); });

  std::uint64_t next_id = 1;
  for (std::size_t lo = 0; lo < n; lo += kZonesPerBatch) {
    const std::size_t count = std::min(kZonesPerBatch, n - lo);
    std::vector<ZoneBatch> batches(count);
    parallel_for(count, [&](std::size_t i) { batches[i] = gen.run(lo + i); });
    for (auto& batch : batches) {
      for (auto& r : batch.records) {
        r.record_id = std::to_string(next_id++);
        ++m.records_by_app[r.app_name];
        sink(r);
      }
    }
  }
  m.records_total = next_id - 1;
  return m;
}

Manifest generate_ndjson(const SynthSpec& spec, std::ostream& out) {
  std::string line;
  return generate(spec, [&](const EventRecord& r) {
    line = to_ndjson(r);
    line.push_back('\n');
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
  });
}

std::vector<EventRecord> generate_records(const SynthSpec& spec, Manifest* manifest) {
  std::vector<EventRecord> records;
  Manifest m = generate(spec, [&](const EventRecord& r) { records.push_back(r); });
  if (manifest) *manifest = std::move(m);
  return records;
}

TargetTable zone_targets(const SynthSpec& spec) {
  static constexpr std::array<double, 7> kLevels{0.8, 0.3, 0.1, 0.2, 0.15, 0.4, 0.25};
  Rng rng = make_rng(spec.seed, {5});
  TargetTable t;
  t.names = {"residential_pct", "control"};
  const std::size_t n = spec.zone_count();
  for (std::size_t z = 0; z < n; ++z) {
    const double level = kLevels[spec.zone_archetype[z] % kLevels.size()];
    const double pct = std::clamp(100.0 * level + 5.0 * standard_normal(rng), 0.0, 100.0);
    t.by_zone[zone_name(z, n)] = {pct, standard_normal(rng)};
  }
  return t;
}

// -- regression fixture -----------------------------------------------------------

PlantedRegression plant_regression(std::size_t n, std::size_t d, std::uint64_t seed, double ceiling) {
  if (d < 5 || n < 10) throw Error(ErrorCode::config, "planted regression needs d >= 5 and n >= 10");
  if (!(ceiling > 0.0 && ceiling <= 1.0)) throw Error(ErrorCode::config, "ceiling must lie in (0, 1]");
  Rng rng = make_rng(seed, {0x9e9});
  PlantedRegression out;
  out.features.values = Matrix(n, d);
  for (std::size_t j = 0; j < d; ++j) out.features.columns.push_back("T_" + std::to_string(j));
  for (std::size_t r = 0; r < n; ++r) {
    out.features.zones.push_back(zone_name(r, n));
    double total = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      out.features.values(r, j) = std::exp(0.35 * standard_normal(rng));
      total += out.features.values(r, j);
    }
    for (std::size_t j = 0; j < d; ++j) out.features.values(r, j) /= total;
  }

  std::vector<std::size_t> perm(d);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = d; i > 1; --i) std::swap(perm[i - 1], perm[uniform_index(rng, i)]);
  out.informative.assign(perm.begin(), perm.begin() + 5);

  std::vector<std::vector<double>> z(5, std::vector<double>(n));
  for (std::size_t k = 0; k < 5; ++k) {
    const std::size_t j = out.informative[k];
    double mean = 0.0, var = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += out.features.values(r, j);
    mean /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) var += std::pow(out.features.values(r, j) - mean, 2);
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (std::size_t r = 0; r < n; ++r) z[k][r] = (out.features.values(r, j) - mean) / sd;
  }
  out.signal.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    out.signal[r] = 2.0 * std::tanh(2.0 * z[0][r]) + std::sin(1.5 * z[1][r]) +
                    0.3 * (z[2][r] * z[2][r] + std::fabs(z[3][r]) + std::tanh(z[4][r]));
  }
  const double mean = std::accumulate(out.signal.begin(), out.signal.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (double s : out.signal) var += (s - mean) * (s - mean);
  var /= static_cast<double>(n);
  out.noise_sd = std::sqrt(var * (1.0 - ceiling) / ceiling);

  out.targets.names = {"planted"};
  for (std::size_t r = 0; r < n; ++r) {
    out.targets.by_zone[out.features.zones[r]] = {out.signal[r] + out.noise_sd * standard_normal(rng)};
  }
  return out;
}

}  // namespace tws::synth
