#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "suplab/breakdown.hpp"
#include "suplab/counters.hpp"
#include "suplab/devmodel.hpp"
#include "suplab/model.hpp"

namespace suplab {

// Share of pages placed on the far tier, x = N / (M + N) for an M:N
// local:remote weighted interleave.
struct InterleaveRatio {
  double remote_fraction = 0;

  static InterleaveRatio from_weights(std::uint64_t local_pages, std::uint64_t remote_pages);
  // Nearest M:N on a percentage grid, reduced by their gcd (0:1 and 1:0 at the ends).
  std::pair<std::uint64_t, std::uint64_t> weights() const;
  void validate() const;
};

struct ScanPoint {
  double remote_fraction = 0;
  double runtime = 0;  // seconds
};

struct ScanOptions {
  SimConfig sim;
  double runtime_jitter = 0;  // relative Gaussian sigma per grid point; 0 = exact curve
};

// Runtime of the workload at grid evenly spaced remote fractions 0..1.
std::vector<ScanPoint> scan_ratios(const WorkloadProfile& w, const DeviceProfile& local, const DeviceProfile& remote,
                                   std::size_t grid, std::uint64_t seed, const ScanOptions& opts = {});

std::size_t scan_argmin(std::span<const ScanPoint> curve);
// t(0) / t(argmin) - 1.
double scan_speedup(std::span<const ScanPoint> curve);

// R terms: each model metric times the amortized offcore latency.
struct InterleaveMetric {
  double latency = 0;  // cycles
  double r_dram = 0;
  double r_cache = 0;
  double r_store = 0;

  double total() const { return r_dram + r_cache + r_store; }
};

InterleaveMetric interleave_metric(const CounterSnapshot& s, const ModelParams& params);

// Per-platform linear maps from R to the best remote fraction and to the
// speedup at that fraction.
struct InterleaveFit {
  double ratio_slope = 0;
  double ratio_intercept = 0;
  double speedup_slope = 0;
  double speedup_intercept = 0;
  std::size_t grid = 101;
};

std::string fit_to_json(const InterleaveFit& fit);
InterleaveFit fit_from_json(std::string_view text);

struct InterleaveSample {
  std::string label;
  CounterSnapshot local;  // all-local run
  double best_remote_fraction = 0;
  double best_speedup = 0;
};

// Scans the workload and pairs its scan optimum with its all-local counters.
InterleaveSample observe_interleave(const WorkloadProfile& w, const DeviceProfile& local, const DeviceProfile& remote,
                                    std::size_t grid, std::uint64_t seed, const ScanOptions& opts = {});

// Ordinary least squares over >= 3 samples with distinct R.
InterleaveFit fit_interleave(std::span<const InterleaveSample> samples, const ModelParams& params,
                             std::size_t grid = 101);

struct InterleaveForecast {
  InterleaveMetric metric;
  Sensitivity sensitivity = Sensitivity::LatencyBound;
  bool beneficial = false;
  InterleaveRatio best_ratio;
  double predicted_speedup = 0;
  // Predicted all-remote slowdown components, the input to slowdown_at.
  SlowdownReport full_remote;
};

// Throws MissingFit without a calibrated fit.
InterleaveForecast forecast(const CounterSnapshot& s, const DeviceProfile& local, const DeviceProfile& remote,
                            const ModelParams& params, const std::optional<InterleaveFit>& fit);

// x * (S_dram + S_cache + S_store) of an all-remote breakdown.
double slowdown_at(InterleaveRatio x, const SlowdownReport& components);

std::string scan_to_csv(std::span<const ScanPoint> curve);
// label, sensitivity, latency, r_dram, r_cache, r_store, r_total, beneficial,
// best_remote_fraction, local_weight, remote_weight, predicted_speedup, full_remote_slowdown
std::string forecasts_to_csv(std::span<const std::pair<std::string, InterleaveForecast>> rows);

}  // namespace suplab
