#include <filesystem>

#include "../support.hpp"
#include "suplab/devmodel.hpp"
#include "suplab/io.hpp"

namespace suplab {
namespace {

using test::sample_snapshot;

std::string csv_of(const CounterSnapshot& s) {
  return counters_to_csv(std::span<const CounterSnapshot>(&s, 1));
}

TEST(Counters, ZeroCountersExceptCyclesIsValid) {
  CounterSnapshot s;
  s.total_cycles = 1000;
  s.instructions = 1000;
  const auto out = parse_counter_csv(csv_of(s));
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0], s);
}

TEST(Counters, LlcStallsAboveMemStallsIsInvariantViolation) {
  auto s = sample_snapshot();
  s.llc_miss_demand_stall_cycles = 500;
  s.mem_stall_cycles = 400;
  EXPECT_ERRC(parse_counter_csv(csv_of(s)), Errc::InvariantViolation);
}

TEST(Counters, OrderingInvariants) {
  auto s = sample_snapshot();
  s.stall_cycles_total = s.total_cycles + 1;
  EXPECT_ERRC(s.validate(), Errc::InvariantViolation);
  s = sample_snapshot();
  s.backend_stall_cycles = s.stall_cycles_total + 1;
  EXPECT_ERRC(s.validate(), Errc::InvariantViolation);
  s = sample_snapshot();
  s.offcore_demand_occupancy = s.offcore_demand_requests - 1;
  EXPECT_ERRC(s.validate(), Errc::InvariantViolation);
  s = sample_snapshot();
  s.mem_stall_cycles = s.backend_stall_cycles + 1;
  EXPECT_ERRC(s.validate(), Errc::InvariantViolation);
}

TEST(Counters, MissingColumn) {
  auto text = csv_of(sample_snapshot());
  text.replace(text.find("lfb_hits"), 8, "lfb_hitz");
  EXPECT_ERRC(parse_counter_csv(text), Errc::MissingColumn);
}

TEST(Counters, NegativeAndMalformedCells) {
  const auto good = csv_of(sample_snapshot());
  auto neg = good;
  neg.replace(neg.find("1000000"), 7, "-1000000");
  EXPECT_ERRC(parse_counter_csv(neg), Errc::NegativeValue);
  auto bad = good;
  bad.replace(bad.find("1000000"), 7, "1e6x");
  EXPECT_ERRC(parse_counter_csv(bad), Errc::MalformedRecord);
}

TEST(Counters, ThreeRowFixtureAmortizedLatency) {
  const auto path = std::filesystem::path(SUPLAB_SOURCE_DIR) / "fixtures/counters3.csv";
  const auto snaps = ingest_counter_log(path, LogFormat::Csv);
  ASSERT_EQ(snaps.size(), 3u);
  // P12 / P11 recomputed from the raw cells.
  const auto table = parse_csv(read_text(path));
  const auto occ = *table.column("offcore_demand_occupancy");
  const auto req = *table.column("offcore_demand_requests");
  for (std::size_t i = 0; i < 3; ++i) {
    const double want = *parse_double(table.rows[i][occ]) / *parse_double(table.rows[i][req]);
    EXPECT_DOUBLE_EQ(amortized_offcore_latency(snaps[i]), want);
  }
}

TEST(Counters, AmortizedLatencyExamples) {
  CounterSnapshot s;
  s.offcore_demand_occupancy = 3000;
  s.offcore_demand_requests = 10;
  EXPECT_DOUBLE_EQ(amortized_offcore_latency(s), 300.0);
  s.offcore_demand_occupancy = 4000;
  s.offcore_demand_requests = 100;
  EXPECT_DOUBLE_EQ(amortized_offcore_latency(s), 40.0);
  s.offcore_demand_requests = 0;
  EXPECT_ERRC(amortized_offcore_latency(s), Errc::NoDemandReads);
}

TEST(Counters, GeneratorHighMlpAmortizedLatency) {
  const DeviceProfile d{"svc320", 320 / 2.1, 1000, 0, 0, 0, 0};
  WorkloadProfile w;
  w.name = "mlp8";
  w.mlp_depth = 8;
  w.demand_miss_rate = 2;
  w.read_bandwidth_demand = 0.1;
  const auto s = synthesize_snapshot(w, d, d, 0.0);
  EXPECT_NEAR(amortized_offcore_latency(s), 40.0, 0.5);
}

TEST(Counters, StallFractions) {
  CounterSnapshot s;
  s.total_cycles = 1000;
  const auto zero = stall_fractions(s);
  EXPECT_EQ(zero.sum(), 0.0);
  s.store_buffer_full_stall_cycles = 100;
  s.backend_stall_cycles = s.stall_cycles_total = s.mem_stall_cycles = 100;
  EXPECT_DOUBLE_EQ(stall_fractions(s).store, 0.1);

  const auto f = stall_fractions(sample_snapshot());
  EXPECT_DOUBLE_EQ(f.store, 0.05);
  EXPECT_DOUBLE_EQ(f.l1, 0.04);
  EXPECT_DOUBLE_EQ(f.l2, 0.03);
  EXPECT_DOUBLE_EQ(f.l3, 0.02);
  EXPECT_DOUBLE_EQ(f.dram, 0.2);
  EXPECT_LE(f.sum(), 1.0);
}

TEST(Counters, CsvAndJsonRoundTrip) {
  std::vector<CounterSnapshot> snaps{sample_snapshot(), sample_snapshot()};
  snaps[1].total_cycles = 18'446'744'073'709'551'615ull;
  snaps[1].stall_cycles_total = 18'446'744'073'709'551'000ull;
  EXPECT_EQ(parse_counter_csv(counters_to_csv(snaps)), snaps);
  EXPECT_EQ(parse_counter_json(counters_to_json(snaps)), snaps);
  EXPECT_EQ(counters_to_csv(parse_counter_csv(counters_to_csv(snaps))), counters_to_csv(snaps));
}

TEST(Counters, RunPairCsvRoundTrip) {
  RunPair p{"a", sample_snapshot(), sample_snapshot(), 1.5, std::nullopt};
  p.remote.total_cycles += 1000;
  const auto back = parse_runpair_csv(runpairs_to_csv(std::span<const RunPair>(&p, 1)));
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].label, "a");
  EXPECT_EQ(back[0].local, p.local);
  EXPECT_EQ(back[0].remote, p.remote);
  EXPECT_EQ(back[0].local_runtime, 1.5);
  EXPECT_FALSE(back[0].remote_runtime);
}

TEST(Counters, RunPairRejectsMismatchedPhases) {
  RunPair p{"a", sample_snapshot(), sample_snapshot(), std::nullopt, std::nullopt};
  p.remote.instructions = p.local.instructions * 2;
  EXPECT_ERRC(p.validate(), Errc::InvariantViolation);
  p.remote.instructions = p.local.instructions;
  p.local_runtime = 0;
  EXPECT_ERRC(p.validate(), Errc::InvariantViolation);
}

}  // namespace
}  // namespace suplab
