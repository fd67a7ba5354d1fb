#pragma once

#include <span>
#include <string>
#include <vector>

#include "suplab/counters.hpp"

namespace suplab {

// Far-memory slowdown of one RunPair split by stall source. Every fraction
// is normalized by the local run's total cycles.
struct SlowdownReport {
  std::string label;
  double total_measured = 0;          // from runtimes, else cycles
  double total_stall_estimate = 0;    // delta stall cycles / c
  double total_backend_estimate = 0;  // delta backend stall cycles / c
  SourceVector components;            // may be negative
  double residual = 0;                // backend estimate minus the five components
};

// (t' - t) / t, or (c' - c) / c when either runtime is missing.
double measure_slowdown(const RunPair& pair);

SlowdownReport decompose(const RunPair& pair);

enum class EstimateKind { Stall, Backend };

// Sorted |estimate - measured| over a set of pairs.
class AccuracyCdf {
 public:
  explicit AccuracyCdf(std::vector<double> sorted_differences);

  std::span<const double> differences() const { return diffs_; }
  // Nearest-rank quantile, q in (0, 1].
  double quantile(double q) const;
  double fraction_within(double tolerance) const;

 private:
  std::vector<double> diffs_;
};

AccuracyCdf estimate_accuracy(std::span<const RunPair> pairs, EstimateKind which);

// label, measured, stall_estimate, backend_estimate, store, L1, L2, L3, DRAM, residual
std::string reports_to_csv(std::span<const SlowdownReport> reports);
// label, source, slowdown (source includes "Other" for the residual)
std::string reports_to_long_csv(std::span<const SlowdownReport> reports);

}  // namespace suplab
