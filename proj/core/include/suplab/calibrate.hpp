#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "suplab/counters.hpp"
#include "suplab/devmodel.hpp"
#include "suplab/model.hpp"

namespace suplab {

enum class MicrobenchKind { PointerChase, StoreBound, ListTraversal, Mixed };

std::string_view to_string(MicrobenchKind kind) noexcept;
std::optional<MicrobenchKind> parse_microbench_kind(std::string_view name);

struct CalibrationRun {
  MicrobenchKind kind = MicrobenchKind::Mixed;
  RunPair pair;
};

struct FitOptions {
  // (k1, p, q) share a common scale; q is pinned to this value.
  double q_anchor = 1.0;
  // When set, p and q are taken as given and only the k's are fitted.
  std::optional<std::pair<double, double>> fixed_pq;
  // Sensitivity threshold = margin * the largest pointer-chase amortized latency.
  double threshold_margin = 1.25;
  std::optional<double> offcore_threshold;
  // Pointer-chase runs must show |M_cache|, |M_store| below this.
  double purity_tolerance = 1e-3;
};

// Pointer chase -> (p, q, k1); store-bound -> k3; list traversal -> k2;
// mixed runs (if any) -> k4 as the mean remaining residual. The sequential
// estimate is then refined jointly over all runs (relative residuals).
ModelParams fit_sequential(std::span<const CalibrationRun> runs, const FitOptions& opts = {});

// Least squares over (k1..k4) with p, q and the threshold held from init.
ModelParams fit_least_squares(std::span<const CalibrationRun> runs, const ModelParams& init);

// Sum of squared (s_pred - measured) over the runs.
double fit_residual(std::span<const CalibrationRun> runs, const ModelParams& params);
std::vector<std::pair<double, double>> calibration_points(std::span<const CalibrationRun> runs,
                                                          const ModelParams& params);

// Run file: kind column followed by the RunPair columns.
std::vector<CalibrationRun> parse_calibration_csv(std::string_view text);
std::string calibration_runs_to_csv(std::span<const CalibrationRun> runs);

// Microbenchmark suite simulated on the device model against a known
// platform response.
struct MicrobenchPlan {
  std::vector<double> chase_mlp{1, 1.5, 2, 3, 4, 6, 8, 12, 16, 24, 32, 48};
  std::size_t store_runs = 4;
  std::size_t list_runs = 4;
  std::size_t mixed_runs = 8;
  double relative_noise = 0;  // Gaussian sigma, multiplicative on each run's slowdown
  SimConfig sim;
};

std::vector<CalibrationRun> simulate_microbenchmarks(const DeviceProfile& local, const DeviceProfile& remote,
                                                     const ModelParams& truth, const MicrobenchPlan& plan,
                                                     std::uint64_t seed);

}  // namespace suplab
