#include "tws/geozone.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "tws/error.hpp"
#include "tws/parallel.hpp"

namespace tws {
namespace {

using nlohmann::json;

constexpr std::size_t kMaxCells = std::size_t{1} << 22;

bool on_segment(Point p, Point a, Point b) noexcept {
  const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
  if (cross != 0.0) return false;
  return p.x >= std::min(a.x, b.x) && p.x <= std::max(a.x, b.x) &&
         p.y >= std::min(a.y, b.y) && p.y <= std::max(a.y, b.y);
}

Ring parse_ring(const json& coords, const std::string& zone_id) {
  if (!coords.is_array()) {
    throw Error(ErrorCode::validation, "zone '" + zone_id + "': ring is not an array");
  }
  Ring ring;
  ring.reserve(coords.size());
  for (const auto& pos : coords) {
    if (!pos.is_array() || pos.size() < 2 || !pos[0].is_number() || !pos[1].is_number()) {
      throw Error(ErrorCode::validation, "zone '" + zone_id + "': bad coordinate position");
    }
    ring.push_back({pos[0].get<double>(), pos[1].get<double>()});
  }
  return ring;
}

void append_polygon(const json& polygon, const std::string& zone_id, std::vector<Ring>& rings) {
  if (!polygon.is_array() || polygon.empty()) {
    throw Error(ErrorCode::validation, "zone '" + zone_id + "': polygon has no rings");
  }
  for (const auto& ring : polygon) rings.push_back(parse_ring(ring, zone_id));
}

}  // namespace

double BBox::diagonal() const noexcept { return std::hypot(max_x - min_x, max_y - min_y); }

bool on_boundary(const Zone& zone, Point p) noexcept {
  for (const auto& ring : zone.rings) {
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
      if (on_segment(p, ring[i], ring[i + 1])) return true;
    }
  }
  return false;
}

bool contains(const Zone& zone, Point p) noexcept {
  if (!zone.bbox.contains(p)) return false;
  bool inside = false;
  for (const auto& ring : zone.rings) {
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
      const Point a = ring[i];
      const Point b = ring[i + 1];
      if (on_segment(p, a, b)) return true;
      if ((a.y > p.y) != (b.y > p.y)) {
        const double x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
        if (p.x < x_cross) inside = !inside;
      }
    }
  }
  return inside;
}

ZoneSet::ZoneSet(std::vector<Zone> zones) : zones_(std::move(zones)) {
  std::set<std::string_view> ids;
  for (auto& z : zones_) {
    if (!ids.insert(z.id).second) {
      throw Error(ErrorCode::validation, "duplicate zone id '" + z.id + "'");
    }
    if (z.rings.empty()) throw Error(ErrorCode::validation, "zone '" + z.id + "' has no rings");
    z.bbox = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
              -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& ring : z.rings) {
      if (ring.size() < 4) {
        throw Error(ErrorCode::validation, "zone '" + z.id + "': ring has fewer than 4 positions");
      }
      if (ring.front().x != ring.back().x || ring.front().y != ring.back().y) {
        throw Error(ErrorCode::validation, "zone '" + z.id + "': ring is not closed");
      }
      for (const auto& p : ring) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
          throw Error(ErrorCode::validation, "zone '" + z.id + "': non-finite coordinate");
        }
        z.bbox.min_x = std::min(z.bbox.min_x, p.x);
        z.bbox.min_y = std::min(z.bbox.min_y, p.y);
        z.bbox.max_x = std::max(z.bbox.max_x, p.x);
        z.bbox.max_y = std::max(z.bbox.max_y, p.y);
      }
    }
  }
  std::sort(zones_.begin(), zones_.end(), [](const Zone& a, const Zone& b) { return a.id < b.id; });
  build_index();
}

void ZoneSet::build_index() {
  cols_ = rows_ = 0;
  cell_start_.assign(1, 0);
  cell_items_.clear();
  if (zones_.empty()) return;

  extent_ = zones_.front().bbox;
  std::vector<double> diagonals;
  for (const auto& z : zones_) {
    extent_.min_x = std::min(extent_.min_x, z.bbox.min_x);
    extent_.min_y = std::min(extent_.min_y, z.bbox.min_y);
    extent_.max_x = std::max(extent_.max_x, z.bbox.max_x);
    extent_.max_y = std::max(extent_.max_y, z.bbox.max_y);
    diagonals.push_back(z.bbox.diagonal());
  }
  std::nth_element(diagonals.begin(), diagonals.begin() + diagonals.size() / 2, diagonals.end());
  cell_ = diagonals[diagonals.size() / 2] / 4.0;
  const double width = extent_.max_x - extent_.min_x;
  const double height = extent_.max_y - extent_.min_y;
  if (!(cell_ > 0.0)) cell_ = std::max({width, height, 1.0});
  // Coarsen until the grid fits the cell budget.
  for (;;) {
    cols_ = static_cast<std::size_t>(std::floor(width / cell_)) + 1;
    rows_ = static_cast<std::size_t>(std::floor(height / cell_)) + 1;
    if (cols_ * rows_ <= kMaxCells) break;
    cell_ *= 2.0;
  }

  // Two-pass CSR fill; zones are visited in id order so each cell's
  // candidate list is sorted by id.
  std::vector<std::size_t> counts(cols_ * rows_, 0);
  auto for_cells = [&](const BBox& b, auto&& fn) {
    const std::size_t c0 = col_of(b.min_x), c1 = col_of(b.max_x);
    const std::size_t r0 = row_of(b.min_y), r1 = row_of(b.max_y);
    for (std::size_t r = r0; r <= r1; ++r)
      for (std::size_t c = c0; c <= c1; ++c) fn(r * cols_ + c);
  };
  for (const auto& z : zones_) for_cells(z.bbox, [&](std::size_t cell) { ++counts[cell]; });
  cell_start_.assign(cols_ * rows_ + 1, 0);
  for (std::size_t i = 0; i < counts.size(); ++i) cell_start_[i + 1] = cell_start_[i] + counts[i];
  cell_items_.assign(cell_start_.back(), 0);
  std::vector<std::size_t> cursor(cell_start_.begin(), cell_start_.end() - 1);
  for (std::size_t zi = 0; zi < zones_.size(); ++zi) {
    for_cells(zones_[zi].bbox, [&](std::size_t cell) { cell_items_[cursor[cell]++] = zi; });
  }
}

std::size_t ZoneSet::col_of(double x) const noexcept {
  const double f = std::floor((x - extent_.min_x) / cell_);
  if (!(f > 0.0)) return 0;
  return std::min(static_cast<std::size_t>(f), cols_ - 1);
}

std::size_t ZoneSet::row_of(double y) const noexcept {
  const double f = std::floor((y - extent_.min_y) / cell_);
  if (!(f > 0.0)) return 0;
  return std::min(static_cast<std::size_t>(f), rows_ - 1);
}

std::span<const std::size_t> ZoneSet::cell(std::size_t col, std::size_t row) const {
  const std::size_t i = row * cols_ + col;
  return {cell_items_.data() + cell_start_[i], cell_start_[i + 1] - cell_start_[i]};
}

std::optional<std::size_t> ZoneSet::find(std::string_view id) const {
  auto it = std::lower_bound(zones_.begin(), zones_.end(), id,
                             [](const Zone& z, std::string_view v) { return z.id < v; });
  if (it == zones_.end() || it->id != id) return std::nullopt;
  return static_cast<std::size_t>(it - zones_.begin());
}

std::optional<std::size_t> ZoneSet::assign_index(Point p) const {
  if (zones_.empty() || !extent_.contains(p)) return std::nullopt;
  for (std::size_t zi : cell(col_of(p.x), row_of(p.y))) {
    if (contains(zones_[zi], p)) return zi;
  }
  return std::nullopt;
}

std::optional<std::size_t> ZoneSet::assign_exhaustive(Point p) const {
  for (std::size_t zi = 0; zi < zones_.size(); ++zi) {
    if (contains(zones_[zi], p)) return zi;
  }
  return std::nullopt;
}

ZoneSet ZoneSet::from_geojson(const json& doc, std::string_view id_property) {
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" ||
      !doc.contains("features") || !doc["features"].is_array()) {
    throw Error(ErrorCode::validation, "GeoJSON: expected a FeatureCollection");
  }
  std::vector<Zone> zones;
  std::size_t index = 0;
  for (const auto& feature : doc["features"]) {
    ++index;
    const json* props = feature.contains("properties") ? &feature["properties"] : nullptr;
    std::string id;
    if (props && props->is_object() && props->contains(id_property)) {
      const auto& v = (*props)[std::string(id_property)];
      if (v.is_string()) {
        id = v.get<std::string>();
      } else if (v.is_number_integer()) {
        id = v.dump();
      }
    }
    if (id.empty()) {
      throw Error(ErrorCode::validation, "GeoJSON feature #" + std::to_string(index) +
                                             " lacks id property '" + std::string(id_property) + "'");
    }
    if (!feature.contains("geometry") || !feature["geometry"].is_object()) {
      throw Error(ErrorCode::validation, "zone '" + id + "': missing geometry");
    }
    const auto& geom = feature["geometry"];
    const std::string type = geom.value("type", "");
    if (!geom.contains("coordinates")) {
      throw Error(ErrorCode::validation, "zone '" + id + "': geometry has no coordinates");
    }
    Zone zone{id, {}, {}};
    if (type == "Polygon") {
      append_polygon(geom["coordinates"], id, zone.rings);
    } else if (type == "MultiPolygon") {
      if (!geom["coordinates"].is_array()) {
        throw Error(ErrorCode::validation, "zone '" + id + "': bad MultiPolygon");
      }
      for (const auto& poly : geom["coordinates"]) append_polygon(poly, id, zone.rings);
    } else {
      throw Error(ErrorCode::validation, "zone '" + id + "': unsupported geometry type '" + type + "'");
    }
    zones.push_back(std::move(zone));
  }
  return ZoneSet(std::move(zones));
}

ZoneSet ZoneSet::load_geojson(const std::filesystem::path& path, std::string_view id_property) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open zones file " + path.string());
  json doc = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) throw Error(ErrorCode::validation, "zones file is not valid JSON: " + path.string());
  return from_geojson(doc, id_property);
}

std::optional<std::string> assign(const EventRecord& record, const ZoneSet& zones) {
  auto zi = zones.assign_index({record.lon, record.lat});
  if (!zi) return std::nullopt;
  return zones.zone(*zi).id;
}

std::vector<ZonedRecord> assign_all(std::span<const EventRecord> records, const ZoneSet& zones) {
  std::vector<ZonedRecord> out(records.size());
  parallel_for(records.size(), [&](std::size_t i) {
    out[i].record = records[i];
    out[i].zone_id = assign(records[i], zones);
  });
  return out;
}

}  // namespace tws
