#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tws/botfilter.hpp"
#include "tws/cluster.hpp"
#include "tws/config.hpp"
#include "tws/csv.hpp"
#include "tws/error.hpp"
#include "tws/events.hpp"
#include "tws/geozone.hpp"
#include "tws/ingest.hpp"
#include "tws/parallel.hpp"
#include "tws/regress.hpp"
#include "tws/signature.hpp"
#include "tws/svg.hpp"
#include "tws/synth.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace tws::cli {
namespace {

struct Options {
  std::string input, zones, targets, out, config, span, week, k_range;
  std::string mode = "shape";
  std::string silhouette = "pairwise";
  std::string family = "all";
  std::string format;
  std::string id_property;
  std::vector<std::string> target_names;
  int bins = 15;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> split_seed;
  std::size_t k = 0;
  double threshold = kDefaultAnomalyThreshold;
  std::size_t top_apps = 0;
  bool plot = false;
  unsigned threads = 0;
};

// Artifacts are computed first and written only once every input has been
// validated; each file goes through a temporary name and a rename.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

  void add(std::string name, std::function<void(std::ostream&)> writer) {
    files_.emplace_back(std::move(name), std::move(writer));
  }
  void add_text(std::string name, std::string text) {
    add(std::move(name), [text = std::move(text)](std::ostream& o) { o << text; });
  }
  void add_json(std::string name, const ojson& j) { add_text(std::move(name), j.dump(2) + "\n"); }

  void commit() {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error(ErrorCode::io, "cannot create output directory " + dir_.string() + ": " + ec.message());
    for (auto& [name, writer] : files_) {
      const fs::path target = dir_ / name;
      fs::create_directories(target.parent_path(), ec);
      const fs::path tmp = target.string() + ".partial";
      {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw Error(ErrorCode::io, "cannot write " + tmp.string());
        writer(f);
        f.flush();
        if (!f) throw Error(ErrorCode::io, "write failed for " + tmp.string());
      }
      fs::rename(tmp, target, ec);
      if (ec) throw Error(ErrorCode::io, "cannot rename " + tmp.string() + ": " + ec.message());
    }
  }

 private:
  fs::path dir_;
  std::vector<std::pair<std::string, std::function<void(std::ostream&)>>> files_;
};

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::io, "cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  if (f.bad()) throw Error(ErrorCode::io, "read error on " + path);
  return std::move(ss).str();
}

nlohmann::json read_json(const std::string& path) {
  auto doc = nlohmann::json::parse(read_file(path), nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorCode::validation, path + " is not valid JSON");
  return doc;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::io, "cannot open " + path);
  return f;
}

KeyValueConfig load_config(const Options& o) {
  return o.config.empty() ? KeyValueConfig{} : KeyValueConfig::load(o.config);
}

std::vector<ZonedRecord> read_zoned(const std::string& path, IngestStats& stats) {
  auto f = open_input(path);
  return read_zoned_ndjson(f, stats);
}

std::string format_offset(std::int64_t seconds) {
  const char sign = seconds < 0 ? '-' : '+';
  const std::int64_t a = seconds < 0 ? -seconds : seconds;
  const auto two = [](std::int64_t v) { return (v < 10 ? "0" : "") + std::to_string(v); };
  return sign + two(a / 3600) + ":" + two(a % 3600 / 60);
}

std::string format_span(const DateRange& r) { return format_date(r.first_day) + ".." + format_date(r.end_day); }

DateRange resolve_span(const Options& o, const KeyValueConfig& config, std::span<const ZonedRecord> records,
                       const TzTable& tz) {
  if (!o.span.empty()) return parse_date_range(o.span);
  if (auto s = config.get("span")) return parse_date_range(*s);
  if (records.empty()) throw Error(ErrorCode::validation, "no records to derive a span from; pass --span");
  return covering_span(records, tz);
}

std::pair<std::size_t, std::size_t> parse_k_range(const std::string& text) {
  const auto dots = text.find("..");
  std::size_t lo = 0, hi = 0;
  try {
    if (dots == std::string::npos) throw std::invalid_argument("missing ..");
    std::size_t used = 0;
    lo = std::stoul(text.substr(0, dots), &used);
    if (used != dots) throw std::invalid_argument("trailing characters");
    const std::string rest = text.substr(dots + 2);
    hi = std::stoul(rest, &used);
    if (used != rest.size()) throw std::invalid_argument("trailing characters");
  } catch (const std::exception&) {
    throw Error(ErrorCode::usage, "--k-range must look like A..B, got '" + text + "'");
  }
  if (lo > hi) throw Error(ErrorCode::usage, "--k-range lower bound exceeds upper bound");
  return {lo, hi};
}

ojson stats_json(const IngestStats& s) {
  ojson reasons = ojson::object();
  for (const auto& [k, v] : s.rejection_reasons) reasons[k] = v;
  return {{"records_read", s.records_read},
          {"records_accepted", s.accepted()},
          {"records_rejected", s.records_rejected},
          {"rejection_reasons", reasons},
          {"distinct_users", s.distinct_users()},
          {"distinct_apps", s.distinct_apps()}};
}

std::string svg_file_name(const std::string& zone) {
  std::string s;
  for (char c : zone) s.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_');
  return "plots/" + s + ".svg";
}

void write_records(std::ostream& o, std::span<const ZonedRecord> records) {
  std::string line;
  for (const auto& r : records) {
    line = to_ndjson(r);
    line.push_back('\n');
    o.write(line.data(), static_cast<std::streamsize>(line.size()));
  }
}

// -- subcommands --------------------------------------------------------------

int cmd_synth(const Options& o, std::ostream& out) {
  synth::SynthSpec spec = o.config.empty() ? synth::reference_spec(o.seed.value_or(20150105))
                                           : synth::spec_from_json(read_json(o.config));
  if (o.seed && !o.config.empty()) spec.seed = *o.seed;
  spec.validate();

  Outputs files(o.out);
  auto manifest = std::make_shared<synth::Manifest>();
  files.add("records.ndjson", [&spec, manifest](std::ostream& f) { *manifest = synth::generate_ndjson(spec, f); });
  files.add("manifest.json", [manifest](std::ostream& f) { f << synth::to_json(*manifest).dump(2) << "\n"; });
  files.add_text("zones.geojson", synth::tessellation_geojson(spec).dump() + "\n");
  files.add("targets.csv", [&spec](std::ostream& f) {
    const TargetTable t = synth::zone_targets(spec);
    csv::Writer w(f);
    std::vector<std::string> header{"zone_id"};
    header.insert(header.end(), t.names.begin(), t.names.end());
    w.row(header);
    for (const auto& [zone, values] : t.by_zone) {
      w.field(zone);
      for (double v : values) w.field(v);
      w.end_row();
    }
  });
  files.add_text("spec.json", synth::to_json(spec).dump(2) + "\n");
  std::ostringstream conf;
  conf << "# pipeline settings matching this synthetic run\n"
       << "tz.offset = " << format_offset(spec.utc_offset) << "\n"
       << "span = " << format_span(synth::span(spec)) << "\n"
       << "id_property = zone_id\n";
  files.add_text("pipeline.conf", conf.str());
  files.commit();
  out << "synth: " << manifest->records_total << " records, " << spec.zone_count() << " zones -> " << o.out << "\n";
  return 0;
}

int cmd_ingest(const Options& o, std::ostream& out) {
  const auto config = load_config(o);
  const FieldMap fields = FieldMap::from_config(config);
  std::string format_tag = o.format;
  if (format_tag.empty()) format_tag = config.get_or("format", "");
  if (format_tag.empty()) format_tag = fs::path(o.input).extension() == ".csv" ? "csv" : "ndjson";
  const InputFormat format = parse_input_format(format_tag);
  const std::string id_property = !o.id_property.empty() ? o.id_property : config.get_or("id_property", "zone_id");

  const ZoneSet zones = ZoneSet::load_geojson(o.zones, id_property);
  IngestStats stats;
  std::vector<EventRecord> records;
  if (format == InputFormat::ndjson) {
    records = parse_ndjson_buffer(read_file(o.input), fields, stats);
  } else {
    auto f = open_input(o.input);
    records = parse_stream(f, format, fields, stats);
  }
  const auto zoned = assign_all(records, zones);
  const auto unzoned = static_cast<std::uint64_t>(
      std::count_if(zoned.begin(), zoned.end(), [](const ZonedRecord& r) { return !r.zone_id; }));
  const auto census = app_user_census(zoned).table();

  ojson summary = stats_json(stats);
  summary["duplicate_record_ids"] = count_duplicate_ids(records);
  summary["unzoned_records"] = unzoned;
  summary["zones"] = zones.size();

  Outputs files(o.out);
  files.add("zoned.ndjson", [&](std::ostream& f) { write_records(f, zoned); });
  files.add("census.csv", [&](std::ostream& f) { write_census_csv(f, census); });
  files.add_json("ingest_stats.json", summary);
  files.commit();
  out << "ingest: " << stats.accepted() << " accepted, " << stats.records_rejected << " rejected, " << unzoned
      << " outside every zone\n";
  return 0;
}

int cmd_filter(const Options& o, std::ostream& out) {
  const auto config = load_config(o);
  const BotThresholds thresholds = BotThresholds::from_config(config);
  IngestStats stats;
  const auto records = read_zoned(o.input, stats);
  const auto verdicts = judge_apps(app_user_census(records).table(), thresholds);
  DropReport report;
  const auto kept = filter_records(records, verdicts, &report);

  ojson summary{{"records_in", report.total_records},
                {"records_dropped", report.dropped_records},
                {"records_out", kept.size()},
                {"dropped_fraction", report.dropped_fraction()},
                {"max_user_share", thresholds.max_user_share},
                {"max_user_tweets", thresholds.max_user_tweets},
                {"input_lines_rejected", stats.records_rejected}};
  ojson dropped = ojson::array();
  for (const auto& v : report.dropped_apps) dropped.push_back(v.app_name);
  summary["dropped_apps"] = dropped;

  Outputs files(o.out);
  files.add("filtered.ndjson", [&](std::ostream& f) { write_records(f, kept); });
  files.add("drop_report.csv", [&](std::ostream& f) { write_drop_report_csv(f, report); });
  files.add("verdicts.csv", [&](std::ostream& f) { write_verdicts_csv(f, verdicts); });
  files.add_json("filter_summary.json", summary);
  files.commit();
  out << "filter: dropped " << report.dropped_apps.size() << " apps, " << report.dropped_records << " records ("
      << csv::format_double(report.dropped_fraction()) << ")\n";
  return 0;
}

int cmd_tws(const Options& o, std::ostream& out) {
  const auto config = load_config(o);
  const TzTable tz = tz_table_from_config(config);
  const BinningSpec spec(o.bins);
  IngestStats stats;
  const auto records = read_zoned(o.input, stats);
  const DateRange span = resolve_span(o, config, records, tz);

  HistogramAccumulator acc(spec, span, tz);
  acc.add_all(records);
  const auto hists = acc.finalize();
  const auto sigs = normalize_all(hists);
  std::vector<Signature> valid;
  for (const auto& s : sigs) {
    if (s.valid) valid.push_back(s);
  }
  const WeeklyHistogram city = acc.finalize_total();

  std::map<std::string, AppSignatureMatrix> app_matrices;
  if (o.top_apps > 0) app_matrices = per_app_signatures(records, spec, span, tz, o.top_apps);

  ojson summary{{"bins", spec.bins()},
                {"bin_minutes", spec.bin_minutes()},
                {"span", format_span(span)},
                {"zones_with_activity", hists.size()},
                {"signatures", sigs.size()},
                {"valid_signatures", valid.size()},
                {"invalid_signatures", sigs.size() - valid.size()},
                {"skipped_outside_span", acc.skipped_outside_span()},
                {"skipped_unzoned", acc.skipped_unzoned()}};
  if (o.top_apps > 0) summary["app_signature_zones"] = app_matrices.size();

  Outputs files(o.out);
  files.add("signatures.csv", [&](std::ostream& f) { write_signatures_csv(f, valid); });
  files.add("signature_meta.csv", [&](std::ostream& f) { write_signature_meta_csv(f, sigs); });
  files.add("histograms.csv", [&](std::ostream& f) { write_histograms_csv(f, hists); });
  if (o.top_apps > 0) files.add("app_signatures.csv", [&](std::ostream& f) { write_app_signatures_csv(f, app_matrices); });
  files.add_json("tws_summary.json", summary);
  if (o.plot) {
    if (city.total() > 0) {
      const std::vector<svg::Series> s{{"all zones", normalize(city).T, svg::palette(0)}};
      files.add_text("plots/ALL.svg", svg::line_chart("Typical week, all zones", s));
    }
    for (const auto& sig : sigs) {
      const std::vector<svg::Series> s{{sig.zone_id, sig.T, svg::palette(0)}};
      files.add_text(svg_file_name(sig.zone_id), svg::line_chart("Typical week, zone " + sig.zone_id, s));
    }
  }
  files.commit();
  out << "tws: " << valid.size() << " valid of " << sigs.size() << " signatures, " << spec.bins() << " bins\n";
  return 0;
}

int cmd_cluster(const Options& o, std::ostream& out) {
  if (o.k == 0 && o.k_range.empty()) throw Error(ErrorCode::usage, "cluster needs --k and/or --k-range");
  const SilhouetteMode mode = o.silhouette == "centroid" ? SilhouetteMode::centroid : SilhouetteMode::pairwise;
  auto f = open_input(o.input);
  const FeatureTable table = read_feature_csv(f);
  const Matrix& X = table.values;
  const std::uint64_t seed = *o.seed;

  Outputs files(o.out);
  std::ostringstream msg;
  if (!o.k_range.empty()) {
    const auto [lo, hi] = parse_k_range(o.k_range);
    auto report = std::make_shared<SelectionReport>(select_k(X, lo, hi, seed, {}, mode));
    ojson rows = ojson::array();
    std::vector<double> inertia;
    for (const auto& r : report->rows) {
      rows.push_back({{"k", r.k}, {"silhouette", r.silhouette}, {"inertia", r.inertia}});
      inertia.push_back(r.inertia);
    }
    files.add("selection.csv", [report](std::ostream& s) { write_selection_csv(s, *report); });
    files.add_json("selection.json", {{"k_range", o.k_range},
                                      {"seed", seed},
                                      {"silhouette_mode", o.silhouette},
                                      {"recommended_k_silhouette", report->recommended_k_silhouette},
                                      {"recommended_k_elbow", report->recommended_k_elbow},
                                      {"rows", rows}});
    const std::vector<svg::Series> s{{"inertia (CSE)", inertia, svg::palette(0)}};
    files.add_text("selection.svg", svg::line_chart("Inertia for k = " + o.k_range, s, false));
    msg << "cluster: silhouette recommends k=" << report->recommended_k_silhouette
        << ", elbow recommends k=" << report->recommended_k_elbow << "\n";
  }
  if (o.k > 0) {
    auto model = std::make_shared<ClusterModel>(kmeans(X, o.k, seed));
    std::optional<double> sil;
    if (o.k >= 2) {
      sil = mode == SilhouetteMode::centroid ? centroid_silhouette(X, model->assignments)
                                             : silhouette(X, model->assignments);
    }
    std::vector<std::size_t> sizes(model->k, 0);
    for (auto a : model->assignments) ++sizes[a];
    ojson summary{{"k", model->k},
                  {"seed", seed},
                  {"inertia", model->inertia},
                  {"iterations", model->iterations},
                  {"converged", model->converged},
                  {"cluster_sizes", sizes}};
    summary["silhouette"] = sil ? ojson(*sil) : ojson(nullptr);
    std::vector<svg::Series> series;
    for (std::size_t c = 0; c < model->k; ++c) {
      const auto row = model->centroids.row(c);
      series.push_back({"cluster " + std::to_string(c), {row.begin(), row.end()}, svg::palette(c)});
    }
    files.add("assignments.csv",
              [model, zones = table.zones](std::ostream& s) { write_assignments_csv(s, zones, model->assignments); });
    files.add("centroids.csv", [model](std::ostream& s) { write_centroids_csv(s, model->centroids); });
    files.add_text("centroids.svg", svg::line_chart("Cluster centroids, k = " + std::to_string(o.k), series));
    files.add_json("cluster_summary.json", summary);
    msg << "cluster: k=" << model->k << " inertia=" << csv::format_double(model->inertia) << "\n";
  }
  files.commit();
  out << msg.str();
  return 0;
}

int cmd_detect(const Options& o, std::ostream& out) {
  const auto config = load_config(o);
  const TzTable tz = tz_table_from_config(config);
  if (o.mode != "shape" && o.mode != "absolute") throw Error(ErrorCode::usage, "--mode must be shape or absolute");
  const std::int64_t week_day = parse_date(o.week);
  IngestStats stats;
  const auto records = read_zoned(o.input, stats);

  DateRange baseline_span;
  if (!o.span.empty()) {
    baseline_span = parse_date_range(o.span);
  } else {
    if (records.empty()) throw Error(ErrorCode::validation, "no records in input");
    const DateRange all = covering_span(records, tz);
    if (week_day <= all.first_day) {
      throw Error(ErrorCode::usage, "no data before --week to form a baseline; pass --span");
    }
    baseline_span = {all.first_day, week_day};
  }

  const BinningSpec six = BinningSpec::six_hour();
  const auto baseline = accumulate(records, six, baseline_span, tz);
  const auto observed = observe_week(records, week_day, tz);

  std::vector<AnomalyReport> reports;
  std::vector<std::string> missing_baseline;
  std::map<std::string, Signature> typical;
  for (const auto& [zone, obs] : observed) {
    auto it = baseline.find(zone);
    if (it == baseline.end() || it->second.total() == 0) {
      missing_baseline.push_back(zone);
      continue;
    }
    if (o.mode == "shape") {
      typical[zone] = normalize(it->second);
      reports.push_back(score_week(obs, typical[zone], o.threshold));
    } else {
      reports.push_back(score_week_absolute(obs, it->second, o.threshold));
    }
  }

  std::size_t flagged_bins = 0;
  ojson flagged_zones = ojson::array();
  for (const auto& r : reports) {
    flagged_bins += r.flagged_count();
    if (r.flagged_count() > 0) flagged_zones.push_back(r.zone_id);
  }
  ojson summary{{"week_start", format_date(week_day)},
                {"baseline_span", format_span(baseline_span)},
                {"mode", o.mode},
                {"threshold", o.threshold},
                {"zones_scored", reports.size()},
                {"zones_without_baseline", missing_baseline},
                {"flagged_bins", flagged_bins},
                {"flagged_zones", flagged_zones}};

  Outputs files(o.out);
  files.add("anomalies.csv", [&](std::ostream& f) { write_anomaly_csv(f, reports); });
  files.add_json("detect_summary.json", summary);
  if (o.plot) {
    for (const auto& r : reports) {
      std::vector<double> exp_share, obs_share;
      for (const auto& b : r.bins) {
        exp_share.push_back(b.expected_share);
        obs_share.push_back(b.observed_share);
      }
      const std::vector<svg::Series> s{{"typical week", exp_share, svg::palette(0)},
                                       {"week of " + o.week, obs_share, svg::palette(1)}};
      files.add_text(svg_file_name(r.zone_id), svg::line_chart("Zone " + r.zone_id + ": typical vs observed", s));
    }
  }
  files.commit();
  out << "detect: " << flagged_bins << " flagged bins in " << flagged_zones.size() << " of " << reports.size()
      << " zones\n";
  return 0;
}

int cmd_model(const Options& o, std::ostream& out) {
  auto f = open_input(o.input);
  const FeatureTable features = read_feature_csv(f);
  auto tf = open_input(o.targets);
  const TargetTable targets = read_targets_csv(tf);
  const std::uint64_t seed = *o.seed;
  const Dataset data = join_targets(features, targets, o.split_seed.value_or(seed));

  std::vector<ModelFamily> families;
  if (o.family == "all") {
    families = {ModelFamily::extra_trees, ModelFamily::random_forest, ModelFamily::ridge_baseline};
  } else {
    families = {parse_model_family(o.family)};
  }
  std::vector<std::string> names = o.target_names.empty() ? targets.names : o.target_names;
  for (const auto& n : names) {
    if (!data.targets.contains(n)) throw Error(ErrorCode::usage, "unknown target '" + n + "'");
  }

  std::vector<ModelReport> reports;
  ojson skipped = ojson::array();
  for (const auto& name : names) {
    try {
      for (auto family : families) {
        reports.push_back(family == ModelFamily::ridge_baseline ? fit_baseline(data, name, kRidgeLambdas, seed)
                                                                : fit_tree_ensemble(data, name, family, TreeGrid{}, seed));
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::undefined && e.code() != ErrorCode::usage) throw;
      skipped.push_back({{"target", name}, {"code", std::string(to_string(e.code()))}, {"message", e.what()}});
      std::erase_if(reports, [&](const ModelReport& r) { return r.target == name; });
    }
  }
  if (reports.empty()) throw Error(ErrorCode::undefined, "no target could be modeled");

  ojson missing = ojson::object();
  for (const auto& [k, v] : data.missing) missing[k] = v;
  ojson summary{{"zones_joined", data.zones.size()},
                {"features", data.features.cols()},
                {"split_seed", data.split_seed},
                {"seed", seed},
                {"missing_targets", missing},
                {"skipped_targets", skipped}};

  Outputs files(o.out);
  files.add("model_table.csv", [&](std::ostream& s) { write_model_table_csv(s, reports); });
  files.add_text("models.json", model_reports_json(reports).dump(2) + "\n");
  files.add_json("model_summary.json", summary);
  files.commit();
  out << "model: " << reports.size() << " reports for " << names.size() - skipped.size() << " targets\n";
  return 0;
}

int cmd_report(const Options& o, std::ostream& out) {
  if (!fs::is_directory(o.input)) throw Error(ErrorCode::usage, "--input must be a run directory");
  static const std::set<std::string> known{"ingest_stats.json", "filter_summary.json", "tws_summary.json",
                                           "selection.json",    "cluster_summary.json", "detect_summary.json",
                                           "model_summary.json", "manifest.json"};
  std::vector<fs::path> found;
  for (const auto& e : fs::recursive_directory_iterator(o.input)) {
    if (e.is_regular_file() && known.contains(e.path().filename().string())) found.push_back(e.path());
  }
  std::sort(found.begin(), found.end());

  ojson report = ojson::object();
  std::ostringstream md;
  md << "# Pipeline report\n\n";
  for (const auto& p : found) {
    const std::string rel = fs::relative(p, o.input).generic_string();
    auto doc = ojson::parse(read_file(p.string()), nullptr, false);
    if (doc.is_discarded()) throw Error(ErrorCode::validation, rel + " is not valid JSON");
    if (p.filename() == "manifest.json") {
      doc = {{"records_total", doc.value("records_total", 0)}, {"records_by_app", doc["records_by_app"]}};
    }
    md << "## " << rel << "\n\n";
    for (const auto& [k, v] : doc.items()) {
      if (v.is_array() && v.size() > 12) {
        md << "- " << k << ": " << v.size() << " entries\n";
      } else {
        md << "- " << k << ": " << v.dump() << "\n";
      }
    }
    md << "\n";
    report[rel] = std::move(doc);
  }
  for (const auto& e : fs::recursive_directory_iterator(o.input)) {
    if (e.is_regular_file() && e.path().filename() == "model_table.csv") {
      md << "## " << fs::relative(e.path(), o.input).generic_string() << "\n\n```\n" << read_file(e.path().string())
         << "```\n\n";
    }
  }
  Outputs files(o.out);
  files.add_text("report.md", md.str());
  files.add_json("report.json", report);
  files.commit();
  out << "report: summarized " << found.size() << " artifacts\n";
  return 0;
}

void emit_error(std::ostream& err, const std::string& stage, std::string_view code, const std::string& message) {
  err << ojson{{"stage", stage}, {"code", std::string(code)}, {"message", message}}.dump() << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Typical weekly signatures of geotagged activity"};
  app.name("tws");
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.add_option("--threads", o.threads, "Worker threads (0 = hardware concurrency)");

  auto input = [&](CLI::App* c, const std::string& help) {
    return c->add_option("--input", o.input, help)->required()->check(CLI::ExistingPath);
  };
  auto output = [&](CLI::App* c) { return c->add_option("--out", o.out, "Output directory")->required(); };
  auto config = [&](CLI::App* c) {
    return c->add_option("--config", o.config, "key = value configuration file")->check(CLI::ExistingFile);
  };

  auto* synth = app.add_subcommand("synth", "Generate a synthetic record stream, zones and manifest");
  output(synth);
  synth->add_option("--seed", o.seed, "Generator seed (default: the reference seed)");
  synth->add_option("--config", o.config, "SynthSpec JSON (default: the reference spec)")->check(CLI::ExistingFile);

  auto* ingest = app.add_subcommand("ingest", "Parse, validate and zone-assign raw records");
  input(ingest, "NDJSON or CSV records");
  ingest->add_option("--zones", o.zones, "GeoJSON zones")->required()->check(CLI::ExistingFile);
  output(ingest);
  config(ingest);
  ingest->add_option("--format", o.format, "ndjson or csv (default: by extension)");
  ingest->add_option("--id-property", o.id_property, "GeoJSON property holding the zone id");

  auto* filter = app.add_subcommand("filter", "Drop records of automated applications");
  input(filter, "Zoned NDJSON from ingest");
  output(filter);
  config(filter);

  auto* tws = app.add_subcommand("tws", "Weekly histograms and typical weekly signatures");
  input(tws, "Filtered zoned NDJSON");
  output(tws);
  config(tws);
  tws->add_option("--bins", o.bins, "Bin width in minutes")->check(CLI::IsMember({15, 360}));
  tws->add_option("--span", o.span, "Local date span A..B (end exclusive)");
  tws->add_option("--top-apps", o.top_apps, "Also write concatenated signatures of the top K apps");
  tws->add_flag("--plot", o.plot, "Write one SVG chart per zone");

  auto* cluster = app.add_subcommand("cluster", "k-means over signatures with model selection");
  input(cluster, "Signature CSV");
  output(cluster);
  cluster->add_option("--seed", o.seed, "Clustering seed")->required();
  cluster->add_option("--k", o.k, "Number of clusters")->check(CLI::PositiveNumber);
  cluster->add_option("--k-range", o.k_range, "Range A..B for silhouette and elbow selection");
  cluster->add_option("--silhouette", o.silhouette, "pairwise or centroid")
      ->check(CLI::IsMember({"pairwise", "centroid"}));

  auto* detect = app.add_subcommand("detect", "Score one week against the typical 6-hour signature");
  input(detect, "Filtered zoned NDJSON");
  output(detect);
  config(detect);
  detect->add_option("--week", o.week, "First local day of the observed week (YYYY-MM-DD)")->required();
  detect->add_option("--span", o.span, "Baseline span A..B (default: all days before --week)");
  detect->add_option("--threshold", o.threshold, "Flag when |score| >= threshold")->check(CLI::NonNegativeNumber);
  detect->add_option("--mode", o.mode, "shape or absolute")->check(CLI::IsMember({"shape", "absolute"}));
  detect->add_flag("--plot", o.plot, "Write typical-vs-observed SVG per zone");

  auto* model = app.add_subcommand("model", "Grid-searched regression of zone targets on signatures");
  input(model, "Feature CSV (signatures or app signatures)");
  model->add_option("--targets", o.targets, "Target CSV keyed by zone_id")->required()->check(CLI::ExistingFile);
  output(model);
  model->add_option("--seed", o.seed, "Model seed")->required();
  model->add_option("--split-seed", o.split_seed, "Split seed (default: --seed)");
  model->add_option("--family", o.family, "extra_trees, random_forest, ridge_baseline or all")
      ->check(CLI::IsMember({"all", "extra_trees", "random_forest", "ridge_baseline", "et", "rf", "ridge"}));
  model->add_option("--target", o.target_names, "Target column(s) to model (default: all)");

  auto* report = app.add_subcommand("report", "Summarize the artifacts of a run directory");
  input(report, "Run directory");
  output(report);

  std::string stage = "cli";
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.back()->help());
    return 0;
  } catch (const CLI::ParseError& e) {
    for (auto* sub : app.get_subcommands()) stage = sub->get_name();
    emit_error(err, stage, "usage", e.what());
    return 2;
  }

  auto* chosen = app.get_subcommands().front();
  stage = chosen->get_name();
  try {
    if (o.threads > 0) set_thread_count(o.threads);
    if (stage == "synth") return cmd_synth(o, out);
    if (stage == "ingest") return cmd_ingest(o, out);
    if (stage == "filter") return cmd_filter(o, out);
    if (stage == "tws") return cmd_tws(o, out);
    if (stage == "cluster") return cmd_cluster(o, out);
    if (stage == "detect") return cmd_detect(o, out);
    if (stage == "model") return cmd_model(o, out);
    return cmd_report(o, out);
  } catch (const Error& e) {
    emit_error(err, stage, to_string(e.code()), e.what());
    return e.code() == ErrorCode::usage || e.code() == ErrorCode::config ? 2 : 1;
  } catch (const std::exception& e) {
    emit_error(err, stage, "internal", e.what());
    return 1;
  }
}

}  // namespace tws::cli
