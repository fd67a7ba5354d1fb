#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace suplab {

// One measurement window of PMU counts (window deltas, never raw
// free-running counters). Model symbols P1..P16 are noted per field.
struct CounterSnapshot {
  std::uint64_t total_cycles = 0;                    // P1
  std::uint64_t stall_cycles_total = 0;
  std::uint64_t backend_stall_cycles = 0;
  std::uint64_t mem_stall_cycles = 0;                // P3, L2-or-beyond
  std::uint64_t llc_miss_demand_stall_cycles = 0;    // P4
  std::uint64_t l1_demand_hits = 0;                  // P5
  std::uint64_t lfb_hits = 0;                        // P6
  std::uint64_t store_buffer_full_stall_cycles = 0;  // P7
  std::uint64_t stall_l1 = 0;                        // P8
  std::uint64_t stall_l2 = 0;                        // P9
  std::uint64_t stall_l3 = 0;                        // P10
  std::uint64_t offcore_demand_requests = 0;         // P11
  std::uint64_t offcore_demand_occupancy = 0;        // P12
  std::uint64_t l1_prefetch_l3_miss = 0;             // P13
  std::uint64_t l1_prefetch_total = 0;               // P14
  std::uint64_t l2_prefetch_l3_miss = 0;             // P15
  std::uint64_t l2_prefetch_l3_hit = 0;              // P16
  std::uint64_t instructions = 0;

  // Throws Error(InvariantViolation) naming the first broken ordering.
  void validate() const;

  friend bool operator==(const CounterSnapshot&, const CounterSnapshot&) = default;
};

inline constexpr std::size_t kCounterFieldCount = 18;

// Canonical column order for CSV/JSON interchange.
inline constexpr std::array<std::string_view, kCounterFieldCount> kCounterFields = {
    "total_cycles",
    "stall_cycles_total",
    "backend_stall_cycles",
    "mem_stall_cycles",
    "llc_miss_demand_stall_cycles",
    "l1_demand_hits",
    "lfb_hits",
    "store_buffer_full_stall_cycles",
    "stall_l1",
    "stall_l2",
    "stall_l3",
    "offcore_demand_requests",
    "offcore_demand_occupancy",
    "l1_prefetch_l3_miss",
    "l1_prefetch_total",
    "l2_prefetch_l3_miss",
    "l2_prefetch_l3_hit",
    "instructions",
};

std::uint64_t& counter_field(CounterSnapshot& s, std::size_t index);
std::uint64_t counter_field(const CounterSnapshot& s, std::size_t index);

// A local-memory run and a far-memory run of the same workload phase.
// Runtimes are optional; without them slowdown falls back to cycles.
struct RunPair {
  std::string label;
  CounterSnapshot local;
  CounterSnapshot remote;
  std::optional<double> local_runtime;   // seconds
  std::optional<double> remote_runtime;  // seconds

  void validate() const;
};

enum class LogFormat { Csv, Json };

std::optional<LogFormat> parse_log_format(std::string_view name);

std::vector<CounterSnapshot> ingest_counter_log(const std::filesystem::path& path, LogFormat format);
std::vector<CounterSnapshot> parse_counter_csv(std::string_view text);
std::vector<CounterSnapshot> parse_counter_json(std::string_view text);

std::string counters_to_csv(std::span<const CounterSnapshot> snapshots);
std::string counters_to_json(std::span<const CounterSnapshot> snapshots);

// Pair files: label, local_runtime, remote_runtime, local_<field>..., remote_<field>...
// An empty runtime cell means "not measured".
std::vector<std::string> runpair_csv_header();
std::vector<std::string> runpair_csv_cells(const RunPair& pair);
RunPair runpair_from_row(const std::vector<std::string>& header, const std::vector<std::string>& row,
                         std::size_t row_number);
std::vector<RunPair> parse_runpair_csv(std::string_view text);
std::string runpairs_to_csv(std::span<const RunPair> pairs);

// P12 / P11. Throws Error(NoDemandReads) when no demand reads were issued.
double amortized_offcore_latency(const CounterSnapshot& s);

// Per-source quantities (stall fractions, slowdown components).
struct SourceVector {
  double store = 0;
  double l1 = 0;
  double l2 = 0;
  double l3 = 0;
  double dram = 0;

  double cache() const { return l1 + l2 + l3; }
  double sum() const { return store + l1 + l2 + l3 + dram; }
};

inline constexpr std::array<std::string_view, 5> kSourceNames = {"store", "L1", "L2", "L3", "DRAM"};
double source_value(const SourceVector& v, std::size_t index);

// Component stall cycles over total cycles. DRAM uses P4, store uses P7.
SourceVector stall_fractions(const CounterSnapshot& s);

}  // namespace suplab
