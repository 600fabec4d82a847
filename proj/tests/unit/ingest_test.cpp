#include <doctest.h>

#include <sstream>
#include <string>
#include <vector>

#include "tws/error.hpp"
#include "tws/ingest.hpp"
#include "tws/parallel.hpp"
#include "tws/random.hpp"

using namespace tws;

namespace {

std::string good_line(int i) {
  std::ostringstream s;
  s << R"({"record_id":"r)" << i << R"(","user_id":"u)" << (i % 37) << R"(","app_name":"app)" << (i % 5)
    << R"(","timestamp_utc":)" << (1420434000 + 97 * i) << R"(,"lat":40.7,"lon":-73.9})";
  return s.str();
}

const std::vector<std::pair<std::string, std::string>> kBadLines = {
    {"{not json", "malformed_line"},
    {R"({"record_id":"x","user_id":"u","app_name":"a","timestamp_utc":1,"lat":40.7})", "missing_field"},
    {R"({"record_id":"x","user_id":"u","app_name":"a","timestamp_utc":1,"lat":"north","lon":1})", "bad_type"},
    {R"({"record_id":"x","user_id":"u","app_name":"a","timestamp_utc":"yesterday","lat":1,"lon":1})",
     "bad_timestamp"},
    {R"({"record_id":"x","user_id":"u","app_name":"a","timestamp_utc":1,"lat":91.5,"lon":1})", "lat_out_of_range"},
    {R"({"record_id":"x","user_id":"u","app_name":"a","timestamp_utc":1,"lat":1,"lon":-181})",
     "lon_out_of_range"},
    {R"({"record_id":"x","user_id":"","app_name":"a","timestamp_utc":1,"lat":1,"lon":1})", "empty_user_id"},
    {R"({"record_id":"x","user_id":"u","app_name":"","timestamp_utc":1,"lat":1,"lon":1})", "empty_app_name"},
    {"[1,2,3]", "malformed_line"},
    {R"({"record_id":"x","user_id":"u","app_name":"a","timestamp_utc":1.5,"lat":1,"lon":1})", "bad_timestamp"},
};

// 1000 lines with the bad ones at known positions.
std::string mixed_input(std::vector<std::size_t>* bad_positions = nullptr) {
  std::string text;
  std::size_t bad = 0;
  for (int i = 0; i < 1000; ++i) {
    if (i % 100 == 37 && bad < kBadLines.size()) {
      text += kBadLines[bad++].first;
      if (bad_positions) bad_positions->push_back(static_cast<std::size_t>(i));
    } else {
      text += good_line(i);
    }
    text += '\n';
  }
  return text;
}

}  // namespace

TEST_CASE("ingest: malformed lines are counted and skipped") {
  std::istringstream in(mixed_input());
  IngestStats stats;
  const auto records = parse_stream(in, InputFormat::ndjson, {}, stats);
  CHECK(records.size() == 990);
  CHECK(stats.records_read == 1000);
  CHECK(stats.records_rejected == 10);
  std::map<std::string, std::uint64_t> expected;
  for (const auto& [line, reason] : kBadLines) ++expected[reason];
  for (const auto& [reason, n] : expected) CHECK(stats.rejection_reasons.at(reason) == n);
  for (const auto& r : records) CHECK(validate(r).empty());
}

TEST_CASE("ingest: every single bad line is rejected for the stated reason") {
  for (const auto& [line, reason] : kBadLines) {
    EventRecord rec;
    CHECK(parse_ndjson_line(line, {}, rec) == reason);
  }
}

TEST_CASE("ingest: parallel buffer parse equals sequential parse") {
  const std::string text = mixed_input();
  std::istringstream in(text);
  IngestStats seq_stats;
  const auto seq = parse_stream(in, InputFormat::ndjson, {}, seq_stats);
  for (unsigned threads : {1u, 3u, 8u}) {
    set_thread_count(threads);
    IngestStats par_stats;
    const auto par = parse_ndjson_buffer(text, {}, par_stats);
    CHECK(par == seq);
    CHECK(par_stats.records_rejected == seq_stats.records_rejected);
    CHECK(par_stats.rejection_reasons == seq_stats.rejection_reasons);
    CHECK(par_stats.distinct_users() == seq_stats.distinct_users());
  }
  set_thread_count(0);
}

TEST_CASE("ingest: blank lines are not records") {
  std::istringstream in(good_line(1) + "\n\n   \n" + good_line(2) + "\n");
  IngestStats stats;
  CHECK(parse_stream(in, InputFormat::ndjson, {}, stats).size() == 2);
  CHECK(stats.records_read == 2);
}

TEST_CASE("ingest: csv with a field map") {
  KeyValueConfig cfg;
  cfg.set("field.user_id", "uid");
  cfg.set("field.timestamp_utc", "time");
  std::istringstream in(
      "record_id,uid,app_name,time,lat,lon\n"
      "a,u1,Instagram,1420434000,40.7,-73.9\n"
      "b,u2,Instagram,1420452000,40.7,-73.9\n"
      "d,u4,Instagram,2015-01-05T10:00Z,40.7,-73.9\n"
      "c,u3,Instagram,1420434000,400,-73.9\n");
  IngestStats stats;
  const auto records = parse_stream(in, InputFormat::csv, FieldMap::from_config(cfg), stats);
  REQUIRE(records.size() == 2);
  CHECK(records[0].user_id == "u1");
  CHECK(records[1].timestamp_utc == 1420452000);
  CHECK(stats.rejection_reasons.at("lat_out_of_range") == 1);
  CHECK(stats.rejection_reasons.at("bad_timestamp") == 1);
}

TEST_CASE("ingest: unknown format tag is a config error") {
  CHECK_THROWS_AS(parse_input_format("xml"), Error);
  CHECK(parse_input_format("csv") == InputFormat::csv);
}

TEST_CASE("ingest: ndjson round trip is lossless") {
  EventRecord r{"id", "user \"q\"", "app", 1420434001, 40.712345678901234, -73.98765432109876};
  ZonedRecord z{r, std::string("Z001")};
  std::istringstream in(to_ndjson(z) + "\n" + to_ndjson(ZonedRecord{r, std::nullopt}) + "\n");
  IngestStats stats;
  const auto back = read_zoned_ndjson(in, stats);
  REQUIRE(back.size() == 2);
  CHECK(back[0] == z);
  CHECK(back[1].record == r);
  CHECK_FALSE(back[1].zone_id.has_value());
}

TEST_CASE("ingest: duplicate record ids are counted") {
  std::vector<EventRecord> v(4);
  v[0].record_id = "a";
  v[1].record_id = "b";
  v[2].record_id = "a";
  v[3].record_id = "a";
  CHECK(count_duplicate_ids(v) == 2);
}

TEST_CASE("ingest: census of concatenation equals merge of censuses") {
  auto rng = make_rng(7);
  std::vector<EventRecord> all;
  for (int i = 0; i < 3000; ++i) {
    EventRecord r;
    r.app_name = "app" + std::to_string(uniform_index(rng, 6));
    r.user_id = "u" + std::to_string(uniform_index(rng, 40));
    all.push_back(r);
  }
  const std::span<const EventRecord> s(all);
  auto a = app_user_census(s.subspan(0, 1234));
  const auto b = app_user_census(s.subspan(1234));
  auto ba = b;
  ba.merge(a);
  a.merge(b);
  const auto whole = app_user_census(s);
  CHECK(a.table() == whole.table());
  CHECK(ba.table() == whole.table());
  CHECK(whole.total() == 3000);

  // Direct tally oracle.
  std::map<std::string, std::map<std::string, std::uint64_t>> tally;
  for (const auto& r : all) ++tally[r.app_name][r.user_id];
  for (const auto& row : whole.table()) {
    const auto& users = tally.at(row.app_name);
    std::uint64_t sum = 0, mx = 0;
    for (const auto& [u, n] : users) {
      sum += n;
      mx = std::max(mx, n);
    }
    CHECK(row.user_count == users.size());
    CHECK(row.tweet_count == sum);
    CHECK(row.max_single_user_tweets == mx);
  }

  std::ostringstream out;
  write_census_csv(out, whole.table());
  std::istringstream in(out.str());
  CHECK(read_census_csv(in) == whole.table());
}
