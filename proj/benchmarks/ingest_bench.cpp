#include <benchmark/benchmark.h>

#include <sstream>
#include <string>

#include "tws/geozone.hpp"
#include "tws/ingest.hpp"
#include "tws/synth.hpp"

namespace {

struct Fixture {
  std::string ndjson;
  tws::ZoneSet zones;
  std::size_t records = 0;
};

// The reference synthetic stream (about one million records), built once.
const Fixture& fixture() {
  static const Fixture f = [] {
    const auto spec = tws::synth::reference_spec();
    std::ostringstream out;
    const auto manifest = tws::synth::generate_ndjson(spec, out);
    return Fixture{std::move(out).str(), tws::ZoneSet(tws::synth::tessellation(spec)), manifest.records_total};
  }();
  return f;
}

void BM_Parse(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) {
    tws::IngestStats stats;
    auto records = tws::parse_ndjson_buffer(f.ndjson, {}, stats);
    benchmark::DoNotOptimize(records.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * f.records));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * f.ndjson.size()));
}

void BM_Assign(benchmark::State& state) {
  const auto& f = fixture();
  tws::IngestStats stats;
  const auto records = tws::parse_ndjson_buffer(f.ndjson, {}, stats);
  for (auto _ : state) {
    auto zoned = tws::assign_all(records, f.zones);
    benchmark::DoNotOptimize(zoned.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * f.records));
}

void BM_IngestAndAssign(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) {
    tws::IngestStats stats;
    const auto records = tws::parse_ndjson_buffer(f.ndjson, {}, stats);
    auto zoned = tws::assign_all(records, f.zones);
    benchmark::DoNotOptimize(zoned.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * f.records));
  state.counters["records"] = static_cast<double>(f.records);
}

BENCHMARK(BM_Parse)->Unit(benchmark::kMillisecond)->Iterations(3);
BENCHMARK(BM_Assign)->Unit(benchmark::kMillisecond)->Iterations(3);
BENCHMARK(BM_IngestAndAssign)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace

BENCHMARK_MAIN();
