#include "suplab/model.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>

#include "suplab/error.hpp"
#include "suplab/io.hpp"

namespace suplab {
namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

void ModelParams::validate() const {
  if (!(k1 > 0)) throw Error(Errc::InvalidParams, "k1 must be > 0");
  if (!(p >= 0)) throw Error(Errc::InvalidParams, "p must be >= 0");
  if (!(q > 0)) throw Error(Errc::InvalidParams, "q must be > 0");
  if (!(offcore_threshold > 0)) throw Error(Errc::InvalidParams, "offcore_threshold must be > 0");
  for (double v : {k1, k2, k3, k4, p, q, offcore_threshold}) {
    if (!std::isfinite(v)) throw Error(Errc::InvalidParams, "non-finite parameter");
  }
}

std::string params_to_json(const ModelParams& params) {
  nlohmann::ordered_json j;
  j["k1"] = params.k1;
  j["k2"] = params.k2;
  j["k3"] = params.k3;
  j["k4"] = params.k4;
  j["p"] = params.p;
  j["q"] = params.q;
  j["offcore_threshold"] = params.offcore_threshold;
  return j.dump(2) + "\n";
}

ModelParams params_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedRecord, std::string("params json: ") + e.what());
  }
  if (!j.is_object()) throw Error(Errc::MalformedRecord, "params json must be an object");
  ModelParams p;
  auto take = [&](const char* key, double& dst) {
    if (!j.contains(key)) throw Error(Errc::MissingColumn, key);
    if (!j[key].is_number()) throw Error(Errc::MalformedRecord, std::string("params field ") + key);
    dst = j[key].get<double>();
  };
  take("k1", p.k1);
  take("k2", p.k2);
  take("k3", p.k3);
  take("k4", p.k4);
  take("p", p.p);
  take("q", p.q);
  take("offcore_threshold", p.offcore_threshold);
  p.validate();
  return p;
}

std::string_view to_string(Sensitivity s) noexcept {
  return s == Sensitivity::BandwidthBound ? "bandwidth_bound" : "latency_bound";
}

double metric_dram(const CounterSnapshot& s, const ModelParams& params) {
  if (s.total_cycles == 0) throw Error(Errc::DivisionByZero, "metric_dram: total_cycles == 0");
  const double base = ratio(s.llc_miss_demand_stall_cycles, s.total_cycles);
  double denom = params.q;
  if (s.offcore_demand_requests > 0) {
    if (s.offcore_demand_occupancy == 0) throw Error(Errc::DivisionByZero, "metric_dram: occupancy == 0");
    // p * 1/(P12/P11)
    denom += params.p * ratio(s.offcore_demand_requests, s.offcore_demand_occupancy);
  }
  if (!(denom > 0)) throw Error(Errc::InvalidParams, "metric_dram: non-positive MLP denominator");
  return base / denom;
}

double metric_cache(const CounterSnapshot& s) {
  if (s.total_cycles == 0) throw Error(Errc::DivisionByZero, "metric_cache: total_cycles == 0");
  const std::uint64_t loads = s.l1_demand_hits + s.lfb_hits;
  const std::uint64_t l2_pf = s.l2_prefetch_l3_miss + s.l2_prefetch_l3_hit;
  // No LFB traffic or no prefetch traffic: no prefetch-driven cache slowdown.
  if (loads == 0 || s.l1_prefetch_total == 0 || l2_pf == 0) return 0.0;
  const double l2_side = static_cast<double>(s.mem_stall_cycles - s.llc_miss_demand_stall_cycles) /
                         static_cast<double>(s.total_cycles);
  return l2_side * ratio(s.lfb_hits, loads) * ratio(s.l1_prefetch_l3_miss, s.l1_prefetch_total) *
         ratio(s.l2_prefetch_l3_miss, l2_pf);
}

double metric_store(const CounterSnapshot& s) {
  if (s.total_cycles == 0) throw Error(Errc::DivisionByZero, "metric_store: total_cycles == 0");
  return ratio(s.store_buffer_full_stall_cycles, s.total_cycles);
}

Classification classify_sensitivity(const CounterSnapshot& s, const ModelParams& params) {
  if (s.offcore_demand_requests == 0) return {Sensitivity::LatencyBound, true};
  const double lat = amortized_offcore_latency(s);
  return {lat > params.offcore_threshold ? Sensitivity::BandwidthBound : Sensitivity::LatencyBound, false};
}

double combine_metrics(const ModelParams& params, double m_dram, double m_cache, double m_store) {
  return params.k1 * m_dram + params.k2 * m_cache + params.k3 * m_store + params.k4;
}

Prediction predict(const CounterSnapshot& s, const ModelParams& params) {
  params.validate();
  Prediction pred;
  pred.m_dram = metric_dram(s, params);
  pred.m_cache = metric_cache(s);
  pred.m_store = metric_store(s);
  pred.s_pred = combine_metrics(params, pred.m_dram, pred.m_cache, pred.m_store);
  const auto cls = classify_sensitivity(s, params);
  pred.sensitivity = cls.sensitivity;
  pred.no_demand_reads = cls.no_demand_reads;
  return pred;
}

double AccuracySummary::within_at(double tolerance) const {
  auto it = within.find(tolerance);
  if (it == within.end()) throw std::out_of_range("tolerance not evaluated");
  return it->second;
}

AccuracySummary evaluate_accuracy(std::span<const std::pair<double, double>> points) {
  if (points.empty()) throw Error(Errc::EmptyInput, "evaluate_accuracy needs at least one point");
  AccuracySummary out;
  out.count = points.size();
  const double n = static_cast<double>(points.size());

  for (double t : kAccuracyTolerances) {
    std::size_t hit = 0;
    for (const auto& [pred, meas] : points) hit += std::abs(pred - meas) <= t ? 1 : 0;
    out.within[t] = static_cast<double>(hit) / n;
  }

  out.pearson = std::numeric_limits<double>::quiet_NaN();
  if (points.size() >= 2) {
    double mp = 0, mm = 0;
    for (const auto& [pred, meas] : points) {
      mp += pred;
      mm += meas;
    }
    mp /= n;
    mm /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (const auto& [pred, meas] : points) {
      sxy += (pred - mp) * (meas - mm);
      sxx += (pred - mp) * (pred - mp);
      syy += (meas - mm) * (meas - mm);
    }
    if (sxx > 0 && syy > 0) {
      out.pearson = sxy / std::sqrt(sxx * syy);
      out.pearson_defined = true;
    }
  }
  return out;
}

std::string predictions_to_csv(std::span<const LabeledPrediction> rows) {
  std::string out = join_csv_row({"label", "m_dram", "m_cache", "m_store", "s_pred", "sensitivity"});
  for (const auto& r : rows) {
    const auto& p = r.prediction;
    out += join_csv_row({r.label, fmt_num(p.m_dram), fmt_num(p.m_cache), fmt_num(p.m_store), fmt_num(p.s_pred),
                         std::string(to_string(p.sensitivity))});
  }
  return out;
}

}  // namespace suplab
