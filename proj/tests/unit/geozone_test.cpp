#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "tws/error.hpp"
#include "tws/geozone.hpp"
#include "tws/random.hpp"
#include "tws/synth.hpp"

using namespace tws;

namespace {

Ring square(double x0, double y0, double x1, double y1) {
  return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}, {x0, y0}};
}

// Winding number of a closed ring around p (nonzero means inside).
int winding(const Ring& ring, Point p) {
  int w = 0;
  for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
    const Point a = ring[i], b = ring[i + 1];
    const double side = (b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y);
    if (a.y <= p.y) {
      if (b.y > p.y && side > 0) ++w;
    } else if (b.y <= p.y && side < 0) {
      --w;
    }
  }
  return w;
}

std::optional<std::string> oracle(const std::vector<Zone>& zones, Point p) {
  std::optional<std::string> best;
  for (const auto& z : zones) {
    bool in = false;
    for (const auto& ring : z.rings) in ^= winding(ring, p) != 0;
    if (in && (!best || z.id < *best)) best = z.id;
  }
  return best;
}

}  // namespace

TEST_CASE("geozone: indexed assignment matches a brute-force scan") {
  auto spec = synth::reference_spec();
  spec.grid_rows = 4;
  spec.grid_cols = 4;
  spec.zone_archetype.assign(16, 0);
  const auto zones = synth::tessellation(spec);
  const ZoneSet set(zones);
  REQUIRE(set.size() == 16);
  const BBox e = set.extent();
  auto rng = make_rng(99);
  std::size_t hits = 0;
  for (int i = 0; i < 10000; ++i) {
    // Sample a slightly larger box so some points fall outside every zone.
    const Point p{e.min_x - 0.002 + uniform01(rng) * (e.max_x - e.min_x + 0.004),
                  e.min_y - 0.002 + uniform01(rng) * (e.max_y - e.min_y + 0.004)};
    const auto got = set.assign_index(p);
    const auto want = oracle(zones, p);
    REQUIRE(got.has_value() == want.has_value());
    if (got) {
      CHECK(set.zone(*got).id == *want);
      ++hits;
    }
    CHECK(set.assign_exhaustive(p) == got);
  }
  CHECK(hits > 8000);
}

TEST_CASE("geozone: holes are excluded") {
  Zone donut{"A", {square(0, 0, 10, 10), square(4, 4, 6, 6)}, {}};
  Zone core{"B", {square(4, 4, 6, 6)}, {}};
  const ZoneSet set({donut, core});
  CHECK(set.zone(*set.assign_index({1, 1})).id == "A");
  CHECK(set.zone(*set.assign_index({5, 5})).id == "B");
  CHECK_FALSE(set.assign_index({11, 5}).has_value());
}

TEST_CASE("geozone: shared boundary goes to the smallest id") {
  const ZoneSet set({Zone{"Z2", {square(1, 0, 2, 1)}, {}}, Zone{"Z1", {square(0, 0, 1, 1)}, {}}});
  CHECK(set.zone(*set.assign_index({1.0, 0.5})).id == "Z1");
  CHECK(set.zone(*set.assign_index({1.5, 0.5})).id == "Z2");
  CHECK(set.zone(*set.assign_index({0.0, 0.0})).id == "Z1");
}

TEST_CASE("geozone: invalid rings and duplicate ids are rejected") {
  Ring open = square(0, 0, 1, 1);
  open.back() = {0.5, 0.0};
  CHECK_THROWS_AS(ZoneSet({Zone{"bad", {open}, {}}}), Error);
  try {
    ZoneSet({Zone{"bad", {open}, {}}});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::validation);
    CHECK(std::string(e.what()).find("bad") != std::string::npos);
  }
  CHECK_THROWS_AS(ZoneSet({Zone{"a", {square(0, 0, 1, 1)}, {}}, Zone{"a", {square(2, 2, 3, 3)}, {}}}), Error);
}

TEST_CASE("geozone: geojson polygons and multipolygons with integer ids") {
  const auto doc = nlohmann::json::parse(R"({
    "type": "FeatureCollection",
    "features": [
      {"type": "Feature", "properties": {"zip": 10001},
       "geometry": {"type": "Polygon", "coordinates": [[[0,0],[1,0],[1,1],[0,1],[0,0]]]}},
      {"type": "Feature", "properties": {"zip": "10002"},
       "geometry": {"type": "MultiPolygon", "coordinates": [
          [[[2,0],[3,0],[3,1],[2,1],[2,0]]],
          [[[5,0],[6,0],[6,1],[5,1],[5,0]]]]}}
    ]})");
  const auto set = ZoneSet::from_geojson(doc, "zip");
  REQUIRE(set.size() == 2);
  CHECK(set.zone(*set.assign_index({0.5, 0.5})).id == "10001");
  CHECK(set.zone(*set.assign_index({5.5, 0.5})).id == "10002");
  CHECK_FALSE(set.assign_index({4, 0.5}).has_value());
}

TEST_CASE("geozone: assign_all keeps order and marks unzoned records") {
  const ZoneSet set({Zone{"A", {square(0, 0, 1, 1)}, {}}});
  std::vector<EventRecord> recs(3);
  recs[0].lon = 0.5, recs[0].lat = 0.5;
  recs[1].lon = 5, recs[1].lat = 5;
  recs[2].lon = 0.2, recs[2].lat = 0.9;
  const auto out = assign_all(recs, set);
  REQUIRE(out.size() == 3);
  CHECK(out[0].zone_id == std::optional<std::string>("A"));
  CHECK_FALSE(out[1].zone_id.has_value());
  CHECK(out[2].record == recs[2]);
}

TEST_CASE("geozone: 262-zone tessellation bboxes match a vertex scan") {
  auto spec = synth::reference_spec();
  spec.grid_rows = 2;
  spec.grid_cols = 131;
  spec.zone_archetype.assign(262, 0);
  const auto zones = synth::tessellation(spec);
  const ZoneSet set(zones);
  REQUIRE(set.size() == 262);
  for (const auto& z : zones) {
    double x0 = 1e9, y0 = 1e9, x1 = -1e9, y1 = -1e9;
    for (const auto& ring : z.rings) {
      for (const auto& p : ring) {
        x0 = std::min(x0, p.x), y0 = std::min(y0, p.y);
        x1 = std::max(x1, p.x), y1 = std::max(y1, p.y);
      }
    }
    const auto& b = set.zone(*set.find(z.id)).bbox;
    CHECK(b.min_x == x0);
    CHECK(b.min_y == y0);
    CHECK(b.max_x == x1);
    CHECK(b.max_y == y1);
  }
}
