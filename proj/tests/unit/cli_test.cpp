#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "tws/synth.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = tws::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(TWS_TEST_TMP) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// A 3x4-zone, two-week spec that runs through the whole chain quickly.
fs::path write_small_spec(const fs::path& dir) {
  auto s = tws::synth::reference_spec(5);
  s.grid_rows = 3;
  s.grid_cols = 4;
  s.zone_archetype = {0, 1, 2, 3, 4, 5, 6, 0, 1, 2, 3, 4};
  s.weeks = 2;
  s.base_rate = 4000;
  s.events.clear();
  const fs::path p = dir / "spec.json";
  std::ofstream(p) << tws::synth::to_json(s).dump(2);
  return p;
}

std::vector<std::pair<std::string, std::string>> tree(const fs::path& dir) {
  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.emplace_back(fs::relative(e.path(), dir).string(), slurp(e.path()));
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

TEST_CASE("cli: usage errors exit 2") {
  CHECK(run({}).code == 2);
  CHECK(run({"nonsense"}).code == 2);
  CHECK(run({"cluster", "--input", "x"}).code == 2);
  CHECK(run({"synth", "--out", "x", "--bogus"}).code == 2);
  const auto r = run({"tws", "--input", "/definitely/not/here", "--out", "x"});
  CHECK(r.code == 2);
  const auto j = nlohmann::json::parse(r.err);
  CHECK(j.contains("stage"));
  CHECK(j.at("code") == "usage");
  CHECK(j.contains("message"));
}

TEST_CASE("cli: help exits 0") { CHECK(run({"--help"}).code == 0); }

TEST_CASE("cli: data errors exit 1 with error json and no artifacts") {
  const auto dir = scratch("bad_zones");
  std::ofstream(dir / "zones.geojson") << R"({"type":"FeatureCollection","features":[
    {"type":"Feature","properties":{"zone_id":"open"},
     "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1]]]}}]})";
  std::ofstream(dir / "records.ndjson")
      << R"({"record_id":"1","user_id":"u","app_name":"a","timestamp_utc":1420434000,"lat":0.5,"lon":0.5})" << "\n";
  const auto out = dir / "out";
  const auto r = run({"ingest", "--input", (dir / "records.ndjson").string(), "--zones",
                      (dir / "zones.geojson").string(), "--out", out.string()});
  CHECK(r.code == 1);
  const auto j = nlohmann::json::parse(r.err);
  CHECK(j.at("stage") == "ingest");
  CHECK(j.at("code") == "validation");
  CHECK(std::string(j.at("message")).find("open") != std::string::npos);
  CHECK((!fs::exists(out) || fs::is_empty(out)));
}

TEST_CASE("cli: full chain is byte-identical across reruns and thread counts") {
  const auto base = scratch("chain");
  const auto spec = write_small_spec(base);

  auto chain = [&](const fs::path& root, const std::string& threads) {
    const std::string r = root.string();
    REQUIRE(run({"--threads", threads, "synth", "--config", spec.string(), "--out", r + "/synth"}).code == 0);
    REQUIRE(run({"--threads", threads, "ingest", "--input", r + "/synth/records.ndjson", "--zones",
                 r + "/synth/zones.geojson", "--config", r + "/synth/pipeline.conf", "--out", r + "/ingest"})
                .code == 0);
    REQUIRE(run({"--threads", threads, "filter", "--input", r + "/ingest/zoned.ndjson", "--out", r + "/filter"})
                .code == 0);
    REQUIRE(run({"--threads", threads, "tws", "--input", r + "/filter/filtered.ndjson", "--config",
                 r + "/synth/pipeline.conf", "--top-apps", "4", "--plot", "--out", r + "/tws"})
                .code == 0);
    REQUIRE(run({"--threads", threads, "cluster", "--input", r + "/tws/signatures.csv", "--seed", "3",
                 "--k-range", "2..6", "--k", "7", "--out", r + "/cluster"})
                .code == 0);
    REQUIRE(run({"--threads", threads, "detect", "--input", r + "/filter/filtered.ndjson", "--config",
                 r + "/synth/pipeline.conf", "--week", "2015-01-12", "--out", r + "/detect"})
                .code == 0);
    REQUIRE(run({"--threads", threads, "model", "--input", r + "/tws/signatures.csv", "--targets",
                 r + "/synth/targets.csv", "--seed", "4", "--family", "ridge", "--out", r + "/model"})
                .code == 0);
    REQUIRE(run({"report", "--input", r, "--out", r + "/report"}).code == 0);
  };
  chain(base / "a", "1");
  chain(base / "b", "4");
  const auto a = tree(base / "a");
  const auto b = tree(base / "b");
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    INFO(a[i].first);
    CHECK(a[i].first == b[i].first);
    CHECK(a[i].second == b[i].second);
  }

  // Declared artifacts exist.
  for (const char* f : {"synth/manifest.json", "ingest/census.csv", "filter/drop_report.csv",
                        "tws/signatures.csv", "tws/app_signatures.csv", "cluster/assignments.csv",
                        "cluster/centroids.svg", "cluster/selection.csv", "detect/anomalies.csv",
                        "model/model_table.csv", "report/report.md"}) {
    INFO(f);
    CHECK(fs::exists(base / "a" / f));
  }
  const auto header = slurp(base / "a/tws/signatures.csv").substr(0, slurp(base / "a/tws/signatures.csv").find('\n'));
  CHECK(std::count(header.begin(), header.end(), ',') == 672);
}

TEST_CASE("cli: too many clusters is a usage error") {
  const auto dir = scratch("k_too_big");
  std::ofstream(dir / "sig.csv") << "zone_id,T_0,T_1\nA,0.5,0.5\nB,0.25,0.75\nC,1,0\n";
  const auto r = run({"cluster", "--input", (dir / "sig.csv").string(), "--seed", "1", "--k", "9", "--out",
                      (dir / "out").string()});
  CHECK(r.code == 2);
  CHECK(nlohmann::json::parse(r.err).at("code") == "usage");
  CHECK((!fs::exists(dir / "out") || fs::is_empty(dir / "out")));
}
