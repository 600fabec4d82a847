#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace tws {

/// One geotagged, timestamped, app-attributed event (a tweet-like post).
struct EventRecord {
  std::string record_id;
  std::string user_id;
  std::string app_name;     // source application label
  std::int64_t timestamp_utc = 0;  // seconds since epoch
  double lat = 0.0;         // WGS84 degrees
  double lon = 0.0;

  friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

/// An event record after spatial assignment; zone_id is empty when the
/// point falls outside every zone.
struct ZonedRecord {
  EventRecord record;
  std::optional<std::string> zone_id;

  friend bool operator==(const ZonedRecord&, const ZonedRecord&) = default;
};

}  // namespace tws
