#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "suplab/counters.hpp"
#include "suplab/model.hpp"
#include "suplab/rng.hpp"

namespace suplab {

// Latency/bandwidth/tail description of one memory tier.
struct DeviceProfile {
  std::string name;
  double base_latency = 100;   // ns, unloaded
  double bandwidth_cap = 100;  // GB/s
  double tail_prob = 0;        // probability of an exponential excess
  double tail_scale = 0;       // ns, mean of that excess
  double jitter_sigma = 0;     // ns, Gaussian body
  double numa_hop_extra = 0;   // ns, added for cross-socket access

  // base_latency > 0, 0 <= tail_prob < 0.1, bandwidth_cap > 0, non-negative scales.
  void validate() const;
  double unloaded_latency() const { return base_latency + numa_hop_extra; }

  friend bool operator==(const DeviceProfile&, const DeviceProfile&) = default;
};

std::string device_to_json(const DeviceProfile& d);
DeviceProfile device_from_json(std::string_view text);

// Shipped presets: local-emr, numa-emr, cxl-a, cxl-b, cxl-c, cxl-d, skx-local, skx-znuma.
std::vector<DeviceProfile> device_presets();
std::optional<DeviceProfile> find_device_preset(std::string_view name);

struct SimConfig {
  double clock_ghz = 2.1;
  double queue_kappa = 0.5;  // queueing shape constant
};

// base * kappa * rho / (1 - rho); throws LoadOutOfRange outside [0, 1).
double queueing_delay(const DeviceProfile& d, double load, double kappa = SimConfig{}.queue_kappa);
double loaded_latency(const DeviceProfile& d, double load, double kappa = SimConfig{}.queue_kappa);

// Random inputs of one request. The layout is fixed (three draws), so a
// sample is pointwise monotone in tail_prob and tail_scale, and applying one
// draw to two devices gives coupled samples.
struct LatencyDraw {
  double z = 0;       // standard normal
  double coin = 1;    // uniform [0, 1)
  double excess = 0;  // unit exponential

  static LatencyDraw next(Rng& rng);
};

double apply_draw(const DeviceProfile& d, double center_ns, const LatencyDraw& r);

// Per-request latencies: body N(base + queueing, jitter) truncated at 0,
// plus Exp(tail_scale) with probability tail_prob. Deterministic in seed.
std::vector<double> sample_latencies(const DeviceProfile& d, std::size_t n, double load, std::uint64_t seed,
                                     double kappa = SimConfig{}.queue_kappa);

// Nearest-rank percentiles; output pairs (q, value) in the order of qs.
std::vector<std::pair<double, double>> latency_percentiles(std::span<const double> samples,
                                                           std::span<const double> qs);
std::string percentiles_to_csv(std::span<const std::pair<double, double>> rows);

// p99.9 - p50 of an unloaded sample of size n.
double tail_spread(const DeviceProfile& d, std::size_t n, std::uint64_t seed);

// Bisection on tail_scale until tail_spread hits target (within tol_ns).
double tune_tail_scale(DeviceProfile d, double target_spread, std::size_t n, std::uint64_t seed,
                       double tol_ns = 0.25);

// Workload characteristics; drives both counter synthesis and runtime simulation.
struct WorkloadProfile {
  std::string name;
  double instructions = 1e9;
  double demand_miss_rate = 5;       // LLC demand misses per kilo-instruction
  double mlp_depth = 1;              // mean outstanding demand reads
  double prefetch_reliance = 0;      // fraction
  double store_intensity = 0;        // fraction
  double read_bandwidth_demand = 0;  // GB/s at memory-stall-free speed
  double base_cpi = 0.5;             // core cycles per instruction without memory stalls

  void validate() const;
};

std::string workload_to_json(const WorkloadProfile& w);
// Accepts one workload object or an array of them.
std::vector<WorkloadProfile> workloads_from_json(std::string_view text);

// Steady-state runtime of a workload whose pages are split between two tiers.
struct TierMixResult {
  double runtime = 0;          // seconds
  double total_cycles = 0;
  double dram_stall_cycles = 0;
  double local_latency = 0;    // ns, loaded
  double remote_latency = 0;   // ns, loaded
  double local_load = 0;
  double remote_load = 0;
  double mean_latency = 0;     // ns, miss-weighted
};

// Closed-loop fixed point: runtime sets achieved bandwidth, bandwidth sets
// queueing latency, latency sets runtime. remote_fraction in [0, 1].
// Identical profiles are one tier, so the split has no effect.
TierMixResult simulate_tier_mix(const WorkloadProfile& w, const DeviceProfile& local, const DeviceProfile& remote,
                                double remote_fraction, const SimConfig& cfg = {});

// Counters of a run with the given remote page fraction (0 = all local).
CounterSnapshot synthesize_snapshot(const WorkloadProfile& w, const DeviceProfile& local,
                                    const DeviceProfile& remote, double remote_fraction,
                                    const SimConfig& cfg = {});

struct SynthOptions {
  SimConfig sim;
  double consistency_noise = 0;  // uniform +/- added to the runtime slowdown
  double dram_model_noise = 0;   // sigma of Gaussian noise on the DRAM stall response
};

// Local run from the physical model; remote run whose per-source stall
// growth follows `params` (the platform's true response). Identical local
// and remote devices yield identical snapshots and zero slowdown.
RunPair synthesize_runpair(const WorkloadProfile& w, const DeviceProfile& local, const DeviceProfile& remote,
                           const ModelParams& params, std::uint64_t seed, const SynthOptions& opts = {});

// Ground-truth platform response used by the generators: k scale with the
// relative latency gap, p = 20 cycles, q = 1, and the sensitivity threshold
// at 1.25x the unloaded local pointer-chase amortized latency.
ModelParams reference_params(const DeviceProfile& local, const DeviceProfile& remote, const SimConfig& cfg = {});

// Amortized offcore latency (cycles) of an unloaded MLP-1 pointer chase.
double pointer_chase_latency_cycles(const DeviceProfile& d, const SimConfig& cfg = {});

struct Range {
  double lo = 0;
  double hi = 0;
};

struct WorkloadRanges {
  Range demand_miss_rate{1, 30};
  Range mlp_depth{1, 8};
  Range prefetch_reliance{0, 1};
  Range store_intensity{0, 0.5};
  Range read_bandwidth_demand{0, 10};
  double instructions = 1e9;
};

std::vector<WorkloadProfile> sample_workloads(const WorkloadRanges& ranges, std::size_t count,
                                              std::uint64_t seed, std::string_view name_prefix = "w");

}  // namespace suplab
