#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "suplab/counters.hpp"
#include "suplab/devmodel.hpp"
#include "suplab/interleave.hpp"
#include "suplab/model.hpp"

namespace suplab {

// Workload suites shared by `demo` and the acceptance harness.

struct Platform {
  std::string name;
  DeviceProfile local;
  DeviceProfile remote;
  // Workload ranges that drive the local tier into bandwidth-bound territory.
  WorkloadRanges bandwidth_ranges;
};

// skx-local / skx-znuma: 52 vs 32 GB/s, close to 5:3.
Platform skx_znuma_platform();
// local-emr / the named CXL preset.
Platform emr_platform(const std::string& remote);

// Broad mix used for accuracy and breakdown runs.
WorkloadRanges general_ranges();

struct AccuracySuite {
  std::vector<RunPair> pairs;
  // (predicted S_dram, measured DRAM component) per pair.
  std::vector<std::pair<double, double>> dram_points;
  ModelParams fitted;
};

// Calibrates on simulated microbenchmarks, then predicts `count` generated
// pairs whose DRAM response carries Gaussian noise of sigma dram_noise.
AccuracySuite accuracy_suite(const Platform& p, std::size_t count, double dram_noise, std::uint64_t seed);

// Draws from the platform's bandwidth ranges, keeping workloads whose local
// run classifies as bandwidth-bound under `params`.
std::vector<WorkloadProfile> bandwidth_bound_suite(const Platform& p, const ModelParams& params, std::size_t count,
                                                   std::uint64_t seed);

}  // namespace suplab
