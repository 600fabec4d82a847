#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tws/record.hpp"

namespace tws {

/// Planar point: x = longitude, y = latitude.
struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Closed ring: front() == back().
using Ring = std::vector<Point>;

struct BBox {
  double min_x = 0.0, min_y = 0.0, max_x = 0.0, max_y = 0.0;

  bool contains(Point p) const noexcept {
    return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
  }
  double diagonal() const noexcept;
};

/// One polygonal zone. All rings of all member polygons are kept flat; the
/// even-odd rule over that set gives holes and multipolygon parts for free.
struct Zone {
  std::string id;
  std::vector<Ring> rings;
  BBox bbox;
};

/// True when p lies on an edge of any ring of the zone.
bool on_boundary(const Zone& zone, Point p) noexcept;

/// Even-odd ray casting, boundary inclusive.
bool contains(const Zone& zone, Point p) noexcept;

/// Immutable set of zones sorted by id with a uniform grid index.
/// assign() is pure and safe to call concurrently.
class ZoneSet {
 public:
  ZoneSet() = default;

  /// Validates and indexes. Throws Error(validation) on an unclosed or
  /// degenerate ring (naming the zone) or a duplicate id.
  explicit ZoneSet(std::vector<Zone> zones);

  /// Reads a FeatureCollection of Polygon/MultiPolygon features. The zone id
  /// is taken from properties[id_property] (string or integer).
  static ZoneSet from_geojson(const nlohmann::json& doc, std::string_view id_property);
  static ZoneSet load_geojson(const std::filesystem::path& path, std::string_view id_property);

  std::size_t size() const noexcept { return zones_.size(); }
  const std::vector<Zone>& zones() const noexcept { return zones_; }
  const Zone& zone(std::size_t i) const { return zones_.at(i); }
  std::optional<std::size_t> find(std::string_view id) const;

  /// Index of the containing zone (lexicographically smallest id when the
  /// point lies on a shared boundary), or nullopt.
  std::optional<std::size_t> assign_index(Point p) const;
  /// Same result without the grid: tests every zone in id order.
  std::optional<std::size_t> assign_exhaustive(Point p) const;

  // Grid introspection.
  double cell_size() const noexcept { return cell_; }
  std::size_t grid_cols() const noexcept { return cols_; }
  std::size_t grid_rows() const noexcept { return rows_; }
  std::span<const std::size_t> cell(std::size_t col, std::size_t row) const;
  const BBox& extent() const noexcept { return extent_; }

 private:
  void build_index();
  std::size_t col_of(double x) const noexcept;
  std::size_t row_of(double y) const noexcept;

  std::vector<Zone> zones_;
  BBox extent_;
  double cell_ = 1.0;
  std::size_t cols_ = 0, rows_ = 0;
  std::vector<std::size_t> cell_start_;  // CSR offsets, size cols*rows + 1
  std::vector<std::size_t> cell_items_;
};

/// Zone id for a record, or nullopt when no zone contains it.
std::optional<std::string> assign(const EventRecord& record, const ZoneSet& zones);

/// Assigns every record; parallel over records, order preserved.
std::vector<ZonedRecord> assign_all(std::span<const EventRecord> records, const ZoneSet& zones);

}  // namespace tws
