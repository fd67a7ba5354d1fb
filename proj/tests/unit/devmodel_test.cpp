#include <algorithm>

#include "../support.hpp"
#include "suplab/breakdown.hpp"
#include "suplab/devmodel.hpp"

namespace suplab {
namespace {

DeviceProfile preset(const char* name) { return *find_device_preset(name); }

double spread(const char* name) { return tail_spread(preset(name), 1'000'000, 7); }

TEST(Devmodel, DeterministicBodyWithoutNoise) {
  DeviceProfile d{"flat", 123.5, 50, 0, 0, 0, 0};
  for (double v : sample_latencies(d, 1000, 0, 1)) EXPECT_EQ(v, 123.5);
}

TEST(Devmodel, PresetsMatchHardwareTable) {
  EXPECT_EQ(preset("local-emr").base_latency, 111);
  EXPECT_EQ(preset("local-emr").bandwidth_cap, 246);
  EXPECT_EQ(preset("numa-emr").unloaded_latency(), 193);
  EXPECT_EQ(preset("numa-emr").bandwidth_cap, 120);
  EXPECT_EQ(preset("cxl-a").base_latency, 214);
  EXPECT_EQ(preset("cxl-a").bandwidth_cap, 24);
  EXPECT_EQ(preset("cxl-b").base_latency, 271);
  EXPECT_EQ(preset("cxl-b").bandwidth_cap, 22);
  EXPECT_EQ(preset("cxl-c").base_latency, 394);
  EXPECT_EQ(preset("cxl-c").bandwidth_cap, 18);
  EXPECT_EQ(preset("cxl-d").base_latency, 239);
  EXPECT_EQ(preset("cxl-d").bandwidth_cap, 52);
  EXPECT_FALSE(find_device_preset("cxl-z"));
}

TEST(Devmodel, TailSpreadTargets) {
  EXPECT_NEAR(spread("local-emr"), 45, 4.5);
  EXPECT_NEAR(spread("numa-emr"), 61, 6.1);
  EXPECT_NEAR(spread("cxl-d"), 75, 7.5);
  EXPECT_NEAR(spread("cxl-b"), 160, 16);
  EXPECT_NEAR(spread("cxl-c"), 160, 16);
}

TEST(Devmodel, MicrosecondTails) {
  const double q[] = {0.9999};
  for (const char* name : {"cxl-b", "cxl-c"}) {
    const auto s = sample_latencies(preset(name), 1'000'000, 0, 7);
    EXPECT_GT(latency_percentiles(s, q)[0].second, 1000.0) << name;
  }
}

TEST(Devmodel, PercentileExamples) {
  const std::vector<double> flat(50, 3.0);
  const double qs[] = {0.01, 0.5, 0.999};
  for (const auto& [q, v] : latency_percentiles(flat, qs)) EXPECT_EQ(v, 3.0);
  std::vector<double> s;
  for (int i = 10; i >= 1; --i) s.push_back(100.0 * i);
  const double median[] = {0.5};
  EXPECT_EQ(latency_percentiles(s, median)[0].second, 500.0);
  EXPECT_ERRC(latency_percentiles({}, median), Errc::EmptyInput);
  const double bad[] = {1.0};
  EXPECT_ERRC(latency_percentiles(s, bad), Errc::InvalidParams);
}

TEST(Devmodel, Determinism) {
  const auto d = preset("cxl-c");
  EXPECT_EQ(sample_latencies(d, 10000, 0.3, 11), sample_latencies(d, 10000, 0.3, 11));
  EXPECT_NE(sample_latencies(d, 10000, 0.3, 11), sample_latencies(d, 10000, 0.3, 12));
}

TEST(Devmodel, QueueingMonotoneAndDivergent) {
  const auto d = preset("cxl-a");
  double prev = 0;
  for (double load = 0; load < 0.99; load += 0.05) {
    const double v = loaded_latency(d, load);
    EXPECT_GT(v, prev);
    prev = v;
  }
  EXPECT_GT(loaded_latency(d, 0.999999), 1e5);
  EXPECT_ERRC(loaded_latency(d, 1.0), Errc::LoadOutOfRange);
  EXPECT_ERRC(loaded_latency(d, -0.1), Errc::LoadOutOfRange);
}

TEST(Devmodel, SpreadMonotoneInTailParameters) {
  auto d = preset("cxl-b");
  double prev = 0;
  for (double p : {0.0, 0.0005, 0.001, 0.002, 0.004}) {
    d.tail_prob = p;
    const double v = tail_spread(d, 100'000, 3);
    EXPECT_GE(v, prev);
    prev = v;
  }
  d = preset("cxl-b");
  prev = 0;
  for (double scale : {0.0, 50.0, 150.0, 300.0, 600.0}) {
    d.tail_scale = scale;
    const double v = tail_spread(d, 100'000, 3);
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(Devmodel, TuneTailScaleHitsTarget) {
  auto d = preset("cxl-b");
  const double scale = tune_tail_scale(d, 120, 200'000, 5);
  d.tail_scale = scale;
  EXPECT_NEAR(tail_spread(d, 200'000, 5), 120, 0.25);
}

TEST(Devmodel, IdenticalTiersGiveZeroSlowdown) {
  const auto d = preset("cxl-a");
  for (const auto& w : sample_workloads({}, 10, 1)) {
    const auto pair = synthesize_runpair(w, d, d, reference_params(d, d), 3);
    EXPECT_EQ(pair.local, pair.remote);
    EXPECT_EQ(measure_slowdown(pair), 0.0);
  }
}

TEST(Devmodel, MlpEightAmortizedLatency) {
  const DeviceProfile svc{"svc", 320 / 2.1, 1000, 0, 0, 0, 0};
  WorkloadProfile w;
  w.name = "mlp8";
  w.mlp_depth = 8;
  w.demand_miss_rate = 2;
  w.read_bandwidth_demand = 0.1;
  // Every page on the 320-cycle tier.
  const auto remote = synthesize_snapshot(w, preset("local-emr"), svc, 1.0);
  EXPECT_NEAR(amortized_offcore_latency(remote), 40, 2);
}

TEST(Devmodel, GeneratedSnapshotsAreValid) {
  const auto local = preset("local-emr");
  for (const char* r : {"numa-emr", "cxl-a", "cxl-b", "cxl-c", "cxl-d"}) {
    const auto remote = preset(r);
    SynthOptions opts;
    opts.consistency_noise = 0.03;
    opts.dram_model_noise = 0.05;
    for (const auto& w : sample_workloads({}, 50, 2)) {
      for (double x : {0.0, 0.4, 1.0}) EXPECT_NO_THROW(synthesize_snapshot(w, local, remote, x).validate());
      EXPECT_NO_THROW(synthesize_runpair(w, local, remote, reference_params(local, remote), 9, opts).validate());
    }
  }
}

TEST(Devmodel, TierMixEndpoints) {
  const auto local = preset("local-emr");
  const auto remote = preset("cxl-b");
  WorkloadProfile w;
  w.name = "w";
  w.demand_miss_rate = 8;
  w.mlp_depth = 2;
  w.read_bandwidth_demand = 5;
  const auto all_local = simulate_tier_mix(w, local, remote, 0.0);
  const auto all_remote = simulate_tier_mix(w, local, remote, 1.0);
  EXPECT_GT(all_remote.runtime, all_local.runtime);
  EXPECT_DOUBLE_EQ(all_local.mean_latency, all_local.local_latency);
  EXPECT_DOUBLE_EQ(all_remote.mean_latency, all_remote.remote_latency);
  EXPECT_ERRC(simulate_tier_mix(w, local, remote, 1.5), Errc::InvalidParams);
}

TEST(Devmodel, ProfileValidation) {
  auto d = preset("cxl-a");
  d.tail_prob = 0.2;
  EXPECT_ERRC(d.validate(), Errc::InconsistentProfile);
  d = preset("cxl-a");
  d.base_latency = 0;
  EXPECT_ERRC(d.validate(), Errc::InconsistentProfile);
  WorkloadProfile w;
  w.mlp_depth = 0.5;
  EXPECT_ERRC(w.validate(), Errc::InconsistentProfile);
}

TEST(Devmodel, JsonRoundTrips) {
  for (const auto& d : device_presets()) {
    const auto back = device_from_json(device_to_json(d));
    EXPECT_EQ(device_to_json(back), device_to_json(d));
  }
  const auto ws = sample_workloads({}, 3, 4);
  for (const auto& w : ws) EXPECT_EQ(workload_to_json(workloads_from_json(workload_to_json(w)).front()), workload_to_json(w));
  EXPECT_ERRC(device_from_json("{}"), Errc::MissingColumn);
}

TEST(Devmodel, ReferenceParams) {
  const auto local = preset("local-emr");
  const auto remote = preset("cxl-a");
  const auto p = reference_params(local, remote);
  const double gap = (214.0 - 111.0) / 111.0;
  EXPECT_NEAR(p.k1, gap, 1e-12);
  EXPECT_NEAR(p.k2, 2 * gap, 1e-12);
  EXPECT_NEAR(p.k3, gap, 1e-12);
  EXPECT_EQ(p.p, 20);
  EXPECT_EQ(p.q, 1);
  EXPECT_NEAR(p.offcore_threshold, 1.25 * 111 * 2.1, 1e-9);
  EXPECT_NEAR(pointer_chase_latency_cycles(local), 111 * 2.1, 1e-9);
}

}  // namespace
}  // namespace suplab
