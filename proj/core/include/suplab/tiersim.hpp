#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "suplab/devmodel.hpp"

namespace suplab {

struct TraceMiss {
  std::uint64_t page_id = 0;
  std::uint32_t group_size = 1;  // demand misses overlapped with this one

  friend bool operator==(const TraceMiss&, const TraceMiss&) = default;
};

struct TraceEpoch {
  std::vector<TraceMiss> misses;
  double store_intensity = 0;
  double prefetch_intensity = 0;

  friend bool operator==(const TraceEpoch&, const TraceEpoch&) = default;
};

// One epoch is a fixed instruction interval; epoch_compute_cycles is the
// time it takes without demand-miss stalls.
struct TierTrace {
  std::uint64_t page_count = 0;
  std::uint64_t wss_pages = 0;
  double epoch_compute_cycles = 1e6;
  std::vector<TraceEpoch> epochs;

  // Throws EmptyTrace, or MalformedRecord naming the bad epoch/page.
  void validate() const;
  std::size_t miss_count() const;

  friend bool operator==(const TierTrace&, const TierTrace&) = default;
};

// Header JSON: page_count, wss_pages, epoch_count, epoch_compute_cycles and
// optional per-epoch store_intensity / prefetch_intensity arrays.
// Body CSV: epoch, page_id, group_size.
TierTrace parse_trace(std::string_view header_json, std::string_view body_csv);
std::string trace_header_to_json(const TierTrace& trace);
std::string trace_body_to_csv(const TierTrace& trace);

enum class Policy { FirstTouch, Tpp, Alto };

std::string_view to_string(Policy p) noexcept;
std::optional<Policy> parse_policy(std::string_view name);

struct PolicyConfig {
  Policy policy = Policy::Tpp;
  std::string name;  // report label; defaults to the policy name
  std::uint32_t promo_threshold_accesses = 2;
  std::uint64_t max_promo_rate = 64;  // pages per epoch
  double alto_lower = 40;             // cycles
  double alto_upper = 100;            // cycles
  std::uint32_t alto_steps = 5;
  std::uint32_t admit_window = 10;    // admit the first ceil(g * window) of every window candidates
  double migration_cost_us = 3;       // blocking, per promoted page
  std::uint64_t fast_capacity = 1;    // pages

  void validate() const;
  std::string label() const;
};

std::string policy_to_json(const PolicyConfig& cfg);
PolicyConfig policy_from_json(std::string_view text);
// Accepts one config object or an array of them.
std::vector<PolicyConfig> policies_from_json(std::string_view text);

// Promotion gate as a function of epoch amortized offcore latency:
// 0 below lower, 1 at or above upper, and steps equal jumps in between.
double alto_gate(double amortized_latency, double lower, double upper, std::uint32_t steps);
// The same gate as a step index in [0, steps].
std::uint32_t alto_gate_level(double amortized_latency, double lower, double upper, std::uint32_t steps);

struct PolicyOutcome {
  std::string label;
  double simulated_runtime = 0;  // seconds
  std::uint64_t promotions = 0;
  std::uint64_t demotions = 0;
  std::vector<std::uint64_t> promo_rate_series;      // pages per epoch
  std::vector<double> amortized_latency_series;      // cycles
  std::vector<double> slow_tier_access_fraction_series;
  std::vector<double> gate_series;                   // 1 for non-Alto policies
  std::vector<double> est_slowdown_series;           // epoch time over its all-fast time, minus 1
  std::uint64_t max_fast_resident = 0;               // peak over epoch ends
};

// Epoch loop: misses pay tier latency / group size, cumulative access
// counts nominate slow-tier pages, promotions run at epoch end with LRU
// demotion. Per-miss latencies are drawn from the device tail model.
PolicyOutcome simulate(const TierTrace& trace, const PolicyConfig& cfg, const DeviceProfile& local,
                       const DeviceProfile& remote, std::uint64_t seed, const SimConfig& sim = {});

struct PolicyComparison {
  std::string label;
  double runtime = 0;
  double normalized = 0;  // runtime over the all-fast baseline
  std::uint64_t promotions = 0;
  std::uint64_t demotions = 0;
};

// Runs every config (in parallel) plus an all-fast first-touch baseline.
std::vector<PolicyComparison> compare_policies(const TierTrace& trace, std::span<const PolicyConfig> cfgs,
                                               const DeviceProfile& local, const DeviceProfile& remote,
                                               std::uint64_t seed, const SimConfig& sim = {},
                                               std::vector<PolicyOutcome>* outcomes = nullptr);

// epoch, amortized_latency, promo_rate, slow_fraction, est_slowdown, gate
std::string epoch_report(const PolicyOutcome& outcome);
// label, runtime, normalized, promotions, demotions
std::string comparison_to_csv(std::span<const PolicyComparison> rows);

// Synthetic traces built from phases of uniformly drawn pages.
struct TracePhase {
  std::size_t epochs = 1;
  std::size_t misses_per_epoch = 0;
  std::uint64_t page_begin = 0;
  std::uint64_t page_span = 1;
  std::uint32_t group_size = 1;
};

TierTrace generate_trace(std::uint64_t page_count, std::span<const TracePhase> phases, std::uint64_t seed,
                         double epoch_compute_cycles = 1e6);

// Fixture traces with the policy configs they are evaluated under.
struct TraceFixture {
  std::string name;
  TierTrace trace;
  std::uint64_t fast_capacity = 0;
  std::uint64_t max_promo_rate = 0;
};

// Graph analytics: a long streaming phase with deep overlap, then a short
// phase hammering a small hot set with no overlap.
TraceFixture twitter_like_fixture(std::uint64_t seed);
// Deeply overlapped misses over a working set far beyond the fast tier.
TraceFixture gpt2_like_fixture(std::uint64_t seed);
// Little overlap throughout.
TraceFixture kron_like_fixture(std::uint64_t seed);
std::vector<TraceFixture> trace_fixtures(std::uint64_t seed);

// first_touch, tpp and alto configs sharing the fixture's capacity and cap.
std::vector<PolicyConfig> fixture_policies(const TraceFixture& fixture);

}  // namespace suplab
