#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "suplab/counters.hpp"

namespace suplab {

// Constants of the linear slowdown model
//   S = k1*M_dram + k2*M_cache + k3*M_store + k4
// with the MLP correction M_dram = P4/P1 * 1/(p * P11/P12 + q).
struct ModelParams {
  double k1 = 1.0;
  double k2 = 0.0;
  double k3 = 0.0;
  double k4 = 0.0;
  double p = 0.0;
  double q = 1.0;
  double offcore_threshold = 250.0;  // cycles

  // k1 > 0, p >= 0, q > 0, offcore_threshold > 0.
  void validate() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

std::string params_to_json(const ModelParams& params);
ModelParams params_from_json(std::string_view text);

enum class Sensitivity { LatencyBound, BandwidthBound };

std::string_view to_string(Sensitivity s) noexcept;

struct Classification {
  Sensitivity sensitivity = Sensitivity::LatencyBound;
  bool no_demand_reads = false;  // set when P11 == 0; result defaults to latency-bound
};

double metric_dram(const CounterSnapshot& s, const ModelParams& params);
double metric_cache(const CounterSnapshot& s);
double metric_store(const CounterSnapshot& s);

// Bandwidth-bound iff amortized offcore latency strictly exceeds the threshold.
Classification classify_sensitivity(const CounterSnapshot& s, const ModelParams& params);

struct Prediction {
  double m_dram = 0;
  double m_cache = 0;
  double m_store = 0;
  double s_pred = 0;
  Sensitivity sensitivity = Sensitivity::LatencyBound;
  bool no_demand_reads = false;

  // Per-source share of s_pred (k4 excluded).
  double dram_slowdown(const ModelParams& params) const { return params.k1 * m_dram; }
  double cache_slowdown(const ModelParams& params) const { return params.k2 * m_cache; }
  double store_slowdown(const ModelParams& params) const { return params.k3 * m_store; }
};

double combine_metrics(const ModelParams& params, double m_dram, double m_cache, double m_store);

Prediction predict(const CounterSnapshot& s, const ModelParams& params);

struct AccuracySummary {
  std::size_t count = 0;
  double pearson = 0;           // NaN when undefined
  bool pearson_defined = false; // false for n < 2 or a constant series
  std::map<double, double> within;  // tolerance -> fraction with |pred - meas| <= tolerance

  double within_at(double tolerance) const;
};

inline constexpr double kAccuracyTolerances[] = {0.02, 0.05, 0.10};

// Points are (predicted, measured).
AccuracySummary evaluate_accuracy(std::span<const std::pair<double, double>> points);

struct LabeledPrediction {
  std::string label;
  Prediction prediction;
};

// label, m_dram, m_cache, m_store, s_pred, sensitivity
std::string predictions_to_csv(std::span<const LabeledPrediction> rows);

}  // namespace suplab
