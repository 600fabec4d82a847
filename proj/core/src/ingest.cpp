#include "tws/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "tws/error.hpp"
#include "tws/parallel.hpp"

namespace tws {
namespace {

using nlohmann::json;

bool is_blank(std::string_view line) {
  return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

std::string_view read_id(const json& value, std::string& out) {
  if (value.is_string()) {
    out = value.get<std::string>();
  } else if (value.is_number_integer()) {
    out = value.is_number_unsigned() ? std::to_string(value.get<std::uint64_t>())
                                     : std::to_string(value.get<std::int64_t>());
  } else {
    return reject::bad_type;
  }
  return {};
}

std::string_view read_timestamp_text(std::string_view text, std::int64_t& out) {
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    return reject::bad_timestamp;
  }
  return {};
}

std::string_view read_timestamp(const json& value, std::int64_t& out) {
  if (value.is_number_unsigned()) {
    const auto u = value.get<std::uint64_t>();
    if (u > static_cast<std::uint64_t>(INT64_MAX)) return reject::bad_timestamp;
    out = static_cast<std::int64_t>(u);
    return {};
  }
  if (value.is_number_integer()) {
    out = value.get<std::int64_t>();
    return {};
  }
  if (value.is_number_float()) {
    const double d = value.get<double>();
    if (d != std::floor(d) || std::abs(d) > 9.0e15) return reject::bad_timestamp;
    out = static_cast<std::int64_t>(d);
    return {};
  }
  if (value.is_string()) return read_timestamp_text(value.get_ref<const std::string&>(), out);
  return reject::bad_timestamp;
}

std::string_view read_coord(const json& value, double& out) {
  if (value.is_number()) {
    out = value.get<double>();
    return {};
  }
  if (value.is_string()) {
    const auto& s = value.get_ref<const std::string&>();
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec == std::errc{} && ptr == s.data() + s.size() && !s.empty()) return {};
  }
  return reject::bad_type;
}

std::string_view parse_number_field(std::string_view text, double& out) {
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) return reject::bad_type;
  return {};
}

}  // namespace

InputFormat parse_input_format(std::string_view tag) {
  if (tag == "ndjson" || tag == "jsonl") return InputFormat::ndjson;
  if (tag == "csv") return InputFormat::csv;
  throw Error(ErrorCode::config, "unknown input format '" + std::string(tag) + "' (want ndjson|csv)");
}

FieldMap FieldMap::from_config(const KeyValueConfig& config) {
  FieldMap m;
  m.record_id = config.get_or("field.record_id", m.record_id);
  m.user_id = config.get_or("field.user_id", m.user_id);
  m.app_name = config.get_or("field.app_name", m.app_name);
  m.timestamp_utc = config.get_or("field.timestamp_utc", m.timestamp_utc);
  m.lat = config.get_or("field.lat", m.lat);
  m.lon = config.get_or("field.lon", m.lon);
  for (const auto* name : {&m.record_id, &m.user_id, &m.app_name, &m.timestamp_utc, &m.lat, &m.lon}) {
    if (name->empty()) throw Error(ErrorCode::config, "field map entries must be non-empty");
  }
  return m;
}

std::string_view validate(const EventRecord& r) {
  if (r.timestamp_utc <= 0) return reject::bad_timestamp;
  if (!(r.lat >= -90.0 && r.lat <= 90.0)) return reject::lat_out_of_range;
  if (!(r.lon >= -180.0 && r.lon <= 180.0)) return reject::lon_out_of_range;
  if (r.user_id.empty()) return reject::empty_user_id;
  if (r.app_name.empty()) return reject::empty_app_name;
  return {};
}

void IngestStats::accept(const EventRecord& record) {
  ++records_read;
  if (!users.contains(record.user_id)) users.insert(record.user_id);
  if (!apps.contains(record.app_name)) apps.insert(record.app_name);
}

void IngestStats::reject(std::string_view reason) {
  ++records_read;
  ++records_rejected;
  auto it = rejection_reasons.find(reason);
  if (it == rejection_reasons.end()) {
    rejection_reasons.emplace(std::string(reason), 1);
  } else {
    ++it->second;
  }
}

void IngestStats::merge(const IngestStats& other) {
  records_read += other.records_read;
  records_rejected += other.records_rejected;
  for (const auto& [reason, n] : other.rejection_reasons) rejection_reasons[reason] += n;
  users.insert(other.users.begin(), other.users.end());
  apps.insert(other.apps.begin(), other.apps.end());
}

std::string_view parse_ndjson_line(std::string_view line, const FieldMap& fields,
                                   EventRecord& out, std::optional<std::string>* zone) {
  json doc = json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_object()) return reject::malformed_line;

  auto field = [&](const std::string& name) -> const json* {
    auto it = doc.find(name);
    return it == doc.end() ? nullptr : &*it;
  };
  const json* rid = field(fields.record_id);
  const json* uid = field(fields.user_id);
  const json* app = field(fields.app_name);
  const json* ts = field(fields.timestamp_utc);
  const json* lat = field(fields.lat);
  const json* lon = field(fields.lon);
  if (!rid || !uid || !app || !ts || !lat || !lon) return reject::missing_field;

  std::string_view why;
  if (!(why = read_id(*rid, out.record_id)).empty()) return why;
  if (!(why = read_id(*uid, out.user_id)).empty()) return why;
  if (!app->is_string()) return reject::bad_type;
  out.app_name = app->get<std::string>();
  if (!(why = read_timestamp(*ts, out.timestamp_utc)).empty()) return why;
  if (!(why = read_coord(*lat, out.lat)).empty()) return why;
  if (!(why = read_coord(*lon, out.lon)).empty()) return why;

  if (zone) {
    zone->reset();
    if (const json* z = field("zone_id"); z && !z->is_null()) {
      if (!z->is_string()) return reject::bad_type;
      *zone = z->get<std::string>();
    }
  }
  return validate(out);
}

RecordReader::RecordReader(std::istream& in, InputFormat format, FieldMap fields)
    : in_(in), format_(format), fields_(std::move(fields)) {
  if (format_ == InputFormat::csv) {
    csv_.emplace(in_);
    read_csv_header();
  }
}

void RecordReader::read_csv_header() {
  if (!csv_->next(row_) || csv_->malformed()) {
    throw Error(ErrorCode::config, "CSV input requires a header row");
  }
  if (!row_.empty() && row_[0].starts_with("\xEF\xBB\xBF")) row_[0].erase(0, 3);
  header_width_ = row_.size();
  const std::array<const std::string*, 6> names = {&fields_.record_id, &fields_.user_id,
                                                   &fields_.app_name, &fields_.timestamp_utc,
                                                   &fields_.lat, &fields_.lon};
  for (std::size_t f = 0; f < names.size(); ++f) {
    auto it = std::find(row_.begin(), row_.end(), *names[f]);
    if (it == row_.end()) {
      throw Error(ErrorCode::config, "CSV header lacks mapped field '" + *names[f] + "'");
    }
    columns_[f] = static_cast<std::size_t>(it - row_.begin());
  }
}

std::optional<EventRecord> RecordReader::next() {
  EventRecord rec;
  if (format_ == InputFormat::ndjson) {
    while (std::getline(in_, line_)) {
      if (is_blank(line_)) continue;
      const auto why = parse_ndjson_line(line_, fields_, rec);
      if (!why.empty()) {
        stats_.reject(why);
        continue;
      }
      stats_.accept(rec);
      return rec;
    }
  } else {
    while (csv_->next(row_)) {
      if (row_.size() == 1 && is_blank(row_[0])) continue;
      if (csv_->malformed() || row_.size() != header_width_) {
        stats_.reject(reject::malformed_line);
        continue;
      }
      rec.record_id = row_[columns_[0]];
      rec.user_id = row_[columns_[1]];
      rec.app_name = row_[columns_[2]];
      std::string_view why = read_timestamp_text(row_[columns_[3]], rec.timestamp_utc);
      if (why.empty()) why = parse_number_field(row_[columns_[4]], rec.lat);
      if (why.empty()) why = parse_number_field(row_[columns_[5]], rec.lon);
      if (why.empty()) why = validate(rec);
      if (!why.empty()) {
        stats_.reject(why);
        continue;
      }
      stats_.accept(rec);
      return rec;
    }
  }
  if (in_.bad()) throw Error(ErrorCode::io, "read error on input stream");
  return std::nullopt;
}

std::vector<EventRecord> parse_stream(std::istream& in, InputFormat format,
                                      const FieldMap& fields, IngestStats& stats) {
  if (!in) throw Error(ErrorCode::io, "input stream is not readable");
  RecordReader reader(in, format, fields);
  std::vector<EventRecord> out;
  while (auto rec = reader.next()) out.push_back(std::move(*rec));
  stats.merge(reader.stats());
  return out;
}

std::vector<EventRecord> parse_ndjson_buffer(std::string_view buffer, const FieldMap& fields,
                                             IngestStats& stats) {
  // Chunk boundaries always fall just after a newline.
  const std::size_t target_chunks = std::max<std::size_t>(1, thread_count() * 4);
  std::vector<std::size_t> cuts{0};
  for (std::size_t c = 1; c < target_chunks; ++c) {
    std::size_t pos = buffer.size() * c / target_chunks;
    if (pos <= cuts.back()) continue;
    pos = buffer.find('\n', pos);
    if (pos == std::string_view::npos) break;
    if (pos + 1 > cuts.back()) cuts.push_back(pos + 1);
  }
  cuts.push_back(buffer.size());

  const std::size_t chunks = cuts.size() - 1;
  std::vector<std::vector<EventRecord>> parts(chunks);
  std::vector<IngestStats> part_stats(chunks);
  parallel_for(chunks, [&](std::size_t c) {
    std::string_view chunk = buffer.substr(cuts[c], cuts[c + 1] - cuts[c]);
    EventRecord rec;
    while (!chunk.empty()) {
      const auto nl = chunk.find('\n');
      const std::string_view line = chunk.substr(0, nl);
      chunk = nl == std::string_view::npos ? std::string_view{} : chunk.substr(nl + 1);
      if (is_blank(line)) continue;
      const auto why = parse_ndjson_line(line, fields, rec);
      if (!why.empty()) {
        part_stats[c].reject(why);
      } else {
        part_stats[c].accept(rec);
        parts[c].push_back(rec);
      }
    }
  });

  std::size_t total = 0;
  for (const auto& p : parts) total += p.size();
  std::vector<EventRecord> out;
  out.reserve(total);
  for (std::size_t c = 0; c < chunks; ++c) {
    std::move(parts[c].begin(), parts[c].end(), std::back_inserter(out));
    stats.merge(part_stats[c]);
  }
  return out;
}

std::vector<ZonedRecord> read_zoned_ndjson(std::istream& in, IngestStats& stats) {
  if (!in) throw Error(ErrorCode::io, "input stream is not readable");
  const FieldMap canonical;
  std::vector<ZonedRecord> out;
  std::string line;
  ZonedRecord zr;
  while (std::getline(in, line)) {
    if (is_blank(line)) continue;
    const auto why = parse_ndjson_line(line, canonical, zr.record, &zr.zone_id);
    if (!why.empty()) {
      stats.reject(why);
      continue;
    }
    stats.accept(zr.record);
    out.push_back(zr);
  }
  if (in.bad()) throw Error(ErrorCode::io, "read error on input stream");
  return out;
}

namespace {

nlohmann::ordered_json record_json(const EventRecord& r) {
  nlohmann::ordered_json j;
  j["record_id"] = r.record_id;
  j["user_id"] = r.user_id;
  j["app_name"] = r.app_name;
  j["timestamp_utc"] = r.timestamp_utc;
  j["lat"] = r.lat;
  j["lon"] = r.lon;
  return j;
}

}  // namespace

std::string to_ndjson(const EventRecord& record) { return record_json(record).dump(); }

std::string to_ndjson(const ZonedRecord& record) {
  auto j = record_json(record.record);
  if (record.zone_id) {
    j["zone_id"] = *record.zone_id;
  } else {
    j["zone_id"] = nullptr;
  }
  return j.dump();
}

std::uint64_t count_duplicate_ids(std::span<const EventRecord> records) {
  std::unordered_set<std::string_view> seen;
  seen.reserve(records.size());
  std::uint64_t dup = 0;
  for (const auto& r : records) {
    if (!seen.insert(r.record_id).second) ++dup;
  }
  return dup;
}

void AppCensus::add(std::string_view app, std::string_view user, std::uint64_t count) {
  auto it = per_app_.find(app);
  if (it == per_app_.end()) it = per_app_.emplace(std::string(app), decltype(it->second){}).first;
  auto& users = it->second;
  auto uit = users.find(std::string(user));
  if (uit == users.end()) {
    users.emplace(std::string(user), count);
  } else {
    uit->second += count;
  }
  total_ += count;
}

void AppCensus::merge(const AppCensus& other) {
  for (const auto& [app, users] : other.per_app_) {
    auto& mine = per_app_[app];
    for (const auto& [user, n] : users) mine[user] += n;
  }
  total_ += other.total_;
}

std::vector<AppCensusRow> AppCensus::table() const {
  std::vector<AppCensusRow> rows;
  rows.reserve(per_app_.size());
  for (const auto& [app, users] : per_app_) {
    AppCensusRow row{app, users.size(), 0, 0};
    for (const auto& [user, n] : users) {
      row.tweet_count += n;
      row.max_single_user_tweets = std::max(row.max_single_user_tweets, n);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

AppCensus app_user_census(std::span<const EventRecord> records) {
  AppCensus c;
  for (const auto& r : records) c.add(r);
  return c;
}

AppCensus app_user_census(std::span<const ZonedRecord> records) {
  AppCensus c;
  for (const auto& r : records) c.add(r.record);
  return c;
}

void write_census_csv(std::ostream& out, std::span<const AppCensusRow> rows) {
  csv::Writer w(out);
  w.row({"app_name", "user_count", "tweet_count", "max_single_user_tweets"});
  for (const auto& r : rows) {
    w.field(r.app_name).field(r.user_count).field(r.tweet_count).field(r.max_single_user_tweets);
    w.end_row();
  }
}

std::vector<AppCensusRow> read_census_csv(std::istream& in) {
  csv::Reader reader(in);
  std::vector<std::string> row;
  if (!reader.next(row) || row.size() < 4 || row[0] != "app_name") {
    throw Error(ErrorCode::validation, "census CSV: missing header");
  }
  std::vector<AppCensusRow> out;
  while (reader.next(row)) {
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() < 4) throw Error(ErrorCode::validation, "census CSV: short row");
    AppCensusRow r{row[0], 0, 0, 0};
    try {
      r.user_count = std::stoull(row[1]);
      r.tweet_count = std::stoull(row[2]);
      r.max_single_user_tweets = std::stoull(row[3]);
    } catch (const std::exception&) {
      throw Error(ErrorCode::validation, "census CSV: non-numeric count for app '" + row[0] + "'");
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace tws
