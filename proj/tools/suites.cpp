#include "suplab/suites.hpp"

#include "suplab/breakdown.hpp"
#include "suplab/calibrate.hpp"
#include "suplab/error.hpp"
#include "suplab/rng.hpp"

namespace suplab {

Platform skx_znuma_platform() {
  // Bandwidth demand is at stall-free speed; bandwidth-bound runs ask for
  // several times the local cap.
  return {"skx-znuma", *find_device_preset("skx-local"), *find_device_preset("skx-znuma"),
          {{4, 10}, {1.5, 4}, {0, 0.5}, {0, 0.3}, {180, 320}, 1e9}};
}

Platform emr_platform(const std::string& remote) {
  const auto r = find_device_preset(remote);
  if (!r) throw Error(Errc::InvalidParams, "unknown device preset '" + remote + "'");
  return {remote, *find_device_preset("local-emr"), *r, {{2, 6}, {1.5, 4}, {0, 0.5}, {0, 0.3}, {450, 700}, 1e9}};
}

WorkloadRanges general_ranges() { return {{1, 30}, {1, 8}, {0, 1}, {0, 0.5}, {0, 10}, 1e9}; }

AccuracySuite accuracy_suite(const Platform& p, std::size_t count, double dram_noise, std::uint64_t seed) {
  const auto truth = reference_params(p.local, p.remote);
  AccuracySuite suite;
  suite.fitted = fit_sequential(simulate_microbenchmarks(p.local, p.remote, truth, {}, derive_seed(seed, 1)));
  const auto workloads = sample_workloads(general_ranges(), count, derive_seed(seed, 2), p.name + "-w");
  SynthOptions opts;
  opts.dram_model_noise = dram_noise;
  opts.consistency_noise = 0.03;
  for (std::size_t i = 0; i < workloads.size(); ++i) {
    auto pair = synthesize_runpair(workloads[i], p.local, p.remote, truth, derive_seed(seed, 1000 + i), opts);
    const auto pred = predict(pair.local, suite.fitted);
    suite.dram_points.emplace_back(pred.dram_slowdown(suite.fitted), decompose(pair).components.dram);
    suite.pairs.push_back(std::move(pair));
  }
  return suite;
}

std::vector<WorkloadProfile> bandwidth_bound_suite(const Platform& p, const ModelParams& params, std::size_t count,
                                                   std::uint64_t seed) {
  std::vector<WorkloadProfile> out;
  for (std::size_t batch = 0; out.size() < count && batch < 64; ++batch) {
    auto candidates = sample_workloads(p.bandwidth_ranges, count, derive_seed(seed, batch), p.name + "-bw" + std::to_string(batch) + "-");
    for (auto& w : candidates) {
      if (out.size() == count) break;
      const auto s = synthesize_snapshot(w, p.local, p.remote, 0.0);
      if (classify_sensitivity(s, params).sensitivity == Sensitivity::BandwidthBound) out.push_back(std::move(w));
    }
  }
  if (out.size() < count) throw Error(Errc::InconsistentProfile, "could not generate enough bandwidth-bound workloads");
  return out;
}

}  // namespace suplab
