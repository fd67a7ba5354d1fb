#include "suplab/interleave.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "suplab/error.hpp"
#include "suplab/io.hpp"
#include "suplab/parallel.hpp"
#include "suplab/rng.hpp"

namespace suplab {
namespace {

struct Line {
  double slope = 0;
  double intercept = 0;
};

Line fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (!(sxx > 0)) throw Error(Errc::ConstantSeries, "interleave fit: all samples share one R");
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

double snap_to_grid(double x, std::size_t grid) {
  const double steps = static_cast<double>(grid - 1);
  return std::round(std::clamp(x, 0.0, 1.0) * steps) / steps;
}

}  // namespace

InterleaveRatio InterleaveRatio::from_weights(std::uint64_t local_pages, std::uint64_t remote_pages) {
  if (local_pages == 0 && remote_pages == 0) throw Error(Errc::InvalidParams, "interleave weights are both 0");
  return {static_cast<double>(remote_pages) / static_cast<double>(local_pages + remote_pages)};
}

std::pair<std::uint64_t, std::uint64_t> InterleaveRatio::weights() const {
  validate();
  const auto pct = static_cast<std::uint64_t>(std::llround(remote_fraction * 100.0));
  const std::uint64_t m = 100 - pct;
  const std::uint64_t g = std::gcd(m, pct);
  return {m / g, pct / g};
}

void InterleaveRatio::validate() const {
  if (!(remote_fraction >= 0 && remote_fraction <= 1)) {
    throw Error(Errc::InvalidParams, "remote_fraction must be in [0, 1]");
  }
}

std::vector<ScanPoint> scan_ratios(const WorkloadProfile& w, const DeviceProfile& local, const DeviceProfile& remote,
                                   std::size_t grid, std::uint64_t seed, const ScanOptions& opts) {
  if (grid < 2) throw Error(Errc::InvalidParams, "scan grid must be >= 2");
  w.validate();
  local.validate();
  remote.validate();
  std::vector<ScanPoint> curve(grid);
  const double steps = static_cast<double>(grid - 1);
  parallel_for(grid, [&](std::size_t i) {
    const double x = static_cast<double>(i) / steps;
    double t = simulate_tier_mix(w, local, remote, x, opts.sim).runtime;
    if (opts.runtime_jitter > 0) {
      Rng rng(derive_seed(seed, i));
      t *= std::max(0.0, 1.0 + opts.runtime_jitter * rng.normal());
    }
    curve[i] = {x, t};
  });
  return curve;
}

std::size_t scan_argmin(std::span<const ScanPoint> curve) {
  if (curve.empty()) throw Error(Errc::EmptyInput, "empty scan");
  std::size_t best = 0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    if (curve[i].runtime < curve[best].runtime) best = i;
  }
  return best;
}

double scan_speedup(std::span<const ScanPoint> curve) {
  return curve.front().runtime / curve[scan_argmin(curve)].runtime - 1.0;
}

InterleaveMetric interleave_metric(const CounterSnapshot& s, const ModelParams& params) {
  InterleaveMetric m;
  m.latency = amortized_offcore_latency(s);
  m.r_dram = metric_dram(s, params) * m.latency;
  m.r_cache = metric_cache(s) * m.latency;
  m.r_store = metric_store(s) * m.latency;
  return m;
}

std::string fit_to_json(const InterleaveFit& fit) {
  nlohmann::ordered_json j;
  j["ratio_slope"] = fit.ratio_slope;
  j["ratio_intercept"] = fit.ratio_intercept;
  j["speedup_slope"] = fit.speedup_slope;
  j["speedup_intercept"] = fit.speedup_intercept;
  j["grid"] = fit.grid;
  return j.dump(2) + "\n";
}

InterleaveFit fit_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedRecord, std::string("interleave fit json: ") + e.what());
  }
  InterleaveFit fit;
  for (const char* key : {"ratio_slope", "ratio_intercept", "speedup_slope", "speedup_intercept"}) {
    if (!j.contains(key) || !j[key].is_number()) throw Error(Errc::MissingColumn, key);
  }
  fit.ratio_slope = j["ratio_slope"].get<double>();
  fit.ratio_intercept = j["ratio_intercept"].get<double>();
  fit.speedup_slope = j["speedup_slope"].get<double>();
  fit.speedup_intercept = j["speedup_intercept"].get<double>();
  fit.grid = j.value("grid", std::size_t{101});
  if (fit.grid < 2) throw Error(Errc::InvalidParams, "interleave fit grid must be >= 2");
  return fit;
}

InterleaveSample observe_interleave(const WorkloadProfile& w, const DeviceProfile& local, const DeviceProfile& remote,
                                    std::size_t grid, std::uint64_t seed, const ScanOptions& opts) {
  const auto curve = scan_ratios(w, local, remote, grid, seed, opts);
  InterleaveSample s;
  s.label = w.name;
  s.local = synthesize_snapshot(w, local, remote, 0.0, opts.sim);
  s.best_remote_fraction = curve[scan_argmin(curve)].remote_fraction;
  s.best_speedup = scan_speedup(curve);
  return s;
}

InterleaveFit fit_interleave(std::span<const InterleaveSample> samples, const ModelParams& params, std::size_t grid) {
  if (samples.size() < 3) throw Error(Errc::EmptyInput, "interleave fit needs at least 3 scanned workloads");
  std::vector<double> r, ratio, speedup;
  for (const auto& s : samples) {
    r.push_back(interleave_metric(s.local, params).total());
    ratio.push_back(s.best_remote_fraction);
    speedup.push_back(s.best_speedup);
  }
  const Line a = fit_line(r, ratio);
  const Line b = fit_line(r, speedup);
  return {a.slope, a.intercept, b.slope, b.intercept, grid};
}

InterleaveForecast forecast(const CounterSnapshot& s, const DeviceProfile& local, const DeviceProfile& remote,
                            const ModelParams& params, const std::optional<InterleaveFit>& fit) {
  if (!fit) throw Error(Errc::MissingFit, "forecast needs a calibrated interleave fit");
  local.validate();
  remote.validate();
  s.validate();

  InterleaveForecast f;
  const auto pred = predict(s, params);
  f.sensitivity = pred.sensitivity;
  f.metric = interleave_metric(s, params);

  const auto frac = stall_fractions(s);
  const double cache_total = frac.cache();
  const double s_cache = pred.cache_slowdown(params);
  auto& c = f.full_remote.components;
  c.dram = pred.dram_slowdown(params);
  c.store = pred.store_slowdown(params);
  if (cache_total > 0) {
    c.l1 = s_cache * frac.l1 / cache_total;
    c.l2 = s_cache * frac.l2 / cache_total;
    c.l3 = s_cache * frac.l3 / cache_total;
  } else {
    c.l1 = c.l2 = c.l3 = s_cache / 3.0;
  }
  f.full_remote.total_backend_estimate = c.sum() + params.k4;
  f.full_remote.total_stall_estimate = f.full_remote.total_backend_estimate;
  f.full_remote.total_measured = pred.s_pred;
  f.full_remote.residual = params.k4;

  if (f.sensitivity == Sensitivity::BandwidthBound) {
    const double r = f.metric.total();
    const double speedup = fit->speedup_slope * r + fit->speedup_intercept;
    if (speedup > 0) {
      f.beneficial = true;
      f.predicted_speedup = speedup;
      f.best_ratio.remote_fraction = snap_to_grid(fit->ratio_slope * r + fit->ratio_intercept, fit->grid);
    }
  }
  return f;
}

double slowdown_at(InterleaveRatio x, const SlowdownReport& components) {
  x.validate();
  const auto& c = components.components;
  return x.remote_fraction * (c.dram + c.cache() + c.store);
}

std::string scan_to_csv(std::span<const ScanPoint> curve) {
  std::string out = join_csv_row({"remote_fraction", "runtime"});
  for (const auto& p : curve) out += join_csv_row({fmt_num(p.remote_fraction), fmt_num(p.runtime)});
  return out;
}

std::string forecasts_to_csv(std::span<const std::pair<std::string, InterleaveForecast>> rows) {
  std::string out = join_csv_row({"label", "sensitivity", "latency", "r_dram", "r_cache", "r_store", "r_total",
                                  "beneficial", "best_remote_fraction", "local_weight", "remote_weight",
                                  "predicted_speedup", "full_remote_slowdown"});
  for (const auto& [label, f] : rows) {
    const auto [m, n] = f.best_ratio.weights();
    out += join_csv_row({label, std::string(to_string(f.sensitivity)), fmt_num(f.metric.latency),
                         fmt_num(f.metric.r_dram), fmt_num(f.metric.r_cache), fmt_num(f.metric.r_store),
                         fmt_num(f.metric.total()), f.beneficial ? "true" : "false",
                         fmt_num(f.best_ratio.remote_fraction), fmt_num(m), fmt_num(n),
                         fmt_num(f.predicted_speedup), fmt_num(slowdown_at({1.0}, f.full_remote))});
  }
  return out;
}

}  // namespace suplab
