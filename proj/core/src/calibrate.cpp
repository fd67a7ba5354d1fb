#include "suplab/calibrate.hpp"

#include <Eigen/Dense>
#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <tuple>

#include "suplab/breakdown.hpp"
#include "suplab/error.hpp"
#include "suplab/io.hpp"
#include "suplab/rng.hpp"

namespace suplab {
namespace {

constexpr double kDegenerate = 1e-12;
// Long windows keep counter rounding far below the fit tolerances.
constexpr double kRunInstructions = 1e12;

std::array<std::uint64_t, 2 * kCounterFieldCount> counter_key(const RunPair& p) {
  std::array<std::uint64_t, 2 * kCounterFieldCount> key{};
  for (std::size_t f = 0; f < kCounterFieldCount; ++f) {
    key[f] = counter_field(p.local, f);
    key[kCounterFieldCount + f] = counter_field(p.remote, f);
  }
  return key;
}

// Fits must not depend on input order, so every fit works on a canonical ordering.
std::vector<CalibrationRun> canonical(std::span<const CalibrationRun> runs) {
  std::vector<CalibrationRun> out(runs.begin(), runs.end());
  std::sort(out.begin(), out.end(), [](const CalibrationRun& a, const CalibrationRun& b) {
    const auto ka = counter_key(a.pair);
    const auto kb = counter_key(b.pair);
    return std::tie(a.kind, ka, a.pair.local_runtime, a.pair.remote_runtime, a.pair.label) <
           std::tie(b.kind, kb, b.pair.local_runtime, b.pair.remote_runtime, b.pair.label);
  });
  return out;
}

// Least squares slope through the origin: sum(x*y) / sum(x*x).
double origin_slope(const std::vector<double>& x, const std::vector<double>& y, const char* what) {
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += x[i] * y[i];
    sxx += x[i] * x[i];
  }
  if (sxx < kDegenerate) throw Error(Errc::DegenerateMetric, what);
  return sxy / sxx;
}

using RunSet = std::vector<const CalibrationRun*>;

void fit_pass(const RunSet& chase, const RunSet& store, const RunSet& list, const RunSet& mixed,
              const FitOptions& opts, ModelParams& out);

// Gauss-Newton over k1..k3 (plus p and k4 when free) on all runs at once,
// starting from the sequential estimate, with q held at its anchor.
// Residuals are relative (r / S): run-to-run noise scales with slowdown.
void refine_joint(const std::vector<CalibrationRun>& runs, bool fit_p, bool fit_k4, ModelParams& out) {
  const auto n = static_cast<Eigen::Index>(runs.size());
  const Eigen::Index m = 3 + (fit_k4 ? 1 : 0) + (fit_p ? 1 : 0);
  if (n <= m) return;
  Eigen::VectorXd s(n), w(n), base(n), inv_lat(n), mc(n), ms(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = runs[static_cast<std::size_t>(i)];
    const auto& l = r.pair.local;
    s(i) = measure_slowdown(r.pair);
    w(i) = std::abs(s(i)) > kDegenerate ? 1.0 / std::abs(s(i)) : 1.0;
    base(i) = static_cast<double>(l.llc_miss_demand_stall_cycles) / static_cast<double>(l.total_cycles);
    inv_lat(i) = l.offcore_demand_requests == 0 ? 0.0 : 1.0 / amortized_offcore_latency(l);
    mc(i) = metric_cache(l);
    ms(i) = metric_store(l);
  }
  auto residual = [&](const ModelParams& t) {
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double model = t.k1 * base(i) / (t.p * inv_lat(i) + t.q) + t.k2 * mc(i) + t.k3 * ms(i) + t.k4;
      r(i) = w(i) * (s(i) - model);
    }
    return r;
  };

  double ssr = residual(out).squaredNorm();
  for (int it = 0; it < 100; ++it) {
    Eigen::MatrixXd jac(n, m);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = out.p * inv_lat(i) + out.q;
      Eigen::Index c = 0;
      jac(i, c++) = w(i) * base(i) / d;
      jac(i, c++) = w(i) * mc(i);
      jac(i, c++) = w(i) * ms(i);
      if (fit_k4) jac(i, c++) = w(i);
      if (fit_p) jac(i, c++) = -w(i) * out.k1 * base(i) * inv_lat(i) / (d * d);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(jac);
    if (qr.rank() < m) return;
    const Eigen::VectorXd step = qr.solve(residual(out));
    bool moved = false;
    for (double scale = 1.0; scale > 1e-6 && !moved; scale *= 0.5) {
      ModelParams t = out;
      Eigen::Index c = 0;
      t.k1 += scale * step(c++);
      t.k2 += scale * step(c++);
      t.k3 += scale * step(c++);
      if (fit_k4) t.k4 += scale * step(c++);
      if (fit_p) t.p = std::max(0.0, t.p + scale * step(c++));
      if (!(t.k1 > 0)) continue;
      const double next = residual(t).squaredNorm();
      if (next < ssr) {
        out = t;
        ssr = next;
        moved = true;
      }
    }
    if (!moved) return;
  }
}

}  // namespace

std::string_view to_string(MicrobenchKind kind) noexcept {
  switch (kind) {
    case MicrobenchKind::PointerChase: return "pointer_chase";
    case MicrobenchKind::StoreBound: return "store_bound";
    case MicrobenchKind::ListTraversal: return "list_traversal";
    case MicrobenchKind::Mixed: return "mixed";
  }
  return "mixed";
}

std::optional<MicrobenchKind> parse_microbench_kind(std::string_view name) {
  for (auto k : {MicrobenchKind::PointerChase, MicrobenchKind::StoreBound, MicrobenchKind::ListTraversal,
                 MicrobenchKind::Mixed}) {
    if (iequals(name, to_string(k))) return k;
  }
  return std::nullopt;
}

ModelParams fit_sequential(std::span<const CalibrationRun> input, const FitOptions& opts) {
  const auto runs = canonical(input);
  RunSet chase, store, list, mixed;
  for (const auto& r : runs) {
    switch (r.kind) {
      case MicrobenchKind::PointerChase: chase.push_back(&r); break;
      case MicrobenchKind::StoreBound: store.push_back(&r); break;
      case MicrobenchKind::ListTraversal: list.push_back(&r); break;
      case MicrobenchKind::Mixed: mixed.push_back(&r); break;
    }
  }
  if (chase.empty()) throw Error(Errc::MissingKind, "pointer_chase");
  if (store.empty()) throw Error(Errc::MissingKind, "store_bound");
  if (list.empty()) throw Error(Errc::MissingKind, "list_traversal");

  for (const auto* r : chase) {
    if (metric_cache(r->pair.local) > opts.purity_tolerance || metric_store(r->pair.local) > opts.purity_tolerance) {
      throw Error(Errc::InvariantViolation, r->pair.label + ": pointer_chase run has cache or store pressure");
    }
  }

  ModelParams out;
  fit_pass(chase, store, list, mixed, opts, out);
  refine_joint(runs, !opts.fixed_pq, !mixed.empty(), out);

  if (opts.offcore_threshold) {
    out.offcore_threshold = *opts.offcore_threshold;
  } else {
    double lat = 0;
    for (const auto* r : chase) lat = std::max(lat, amortized_offcore_latency(r->pair.local));
    out.offcore_threshold = opts.threshold_margin * lat;
  }
  out.validate();
  return out;
}

namespace {

void fit_pass(const RunSet& chase, const RunSet& store, const RunSet& list, const RunSet& mixed,
              const FitOptions& opts, ModelParams& out) {
  auto slowdown = [](const CalibrationRun* r) { return measure_slowdown(r->pair); };
  if (opts.fixed_pq) {
    out.p = opts.fixed_pq->first;
    out.q = opts.fixed_pq->second;
    std::vector<double> m, s;
    for (const auto* r : chase) {
      m.push_back(metric_dram(r->pair.local, out));
      s.push_back(slowdown(r));
    }
    out.k1 = origin_slope(m, s, "pointer_chase M_DRAM is zero");
  } else {
    // r/S = (p/k1) * (1/L) + q/k1, a line in 1/L.
    std::vector<double> x, y;
    for (const auto* r : chase) {
      const auto& l = r->pair.local;
      if (l.total_cycles == 0) throw Error(Errc::DivisionByZero, r->pair.label + ": total_cycles");
      const double base = static_cast<double>(l.llc_miss_demand_stall_cycles) / static_cast<double>(l.total_cycles);
      const double s = slowdown(r);
      if (!(s > 0) || !(base > 0)) throw Error(Errc::DegenerateMetric, r->pair.label + ": pointer_chase shows no DRAM slowdown");
      x.push_back(1.0 / amortized_offcore_latency(l));
      y.push_back(base / s);
    }
    const auto [xmin, xmax] = std::minmax_element(x.begin(), x.end());
    if (*xmax - *xmin <= 1e-9 * *xmax) {
      throw Error(Errc::InsufficientMlpSpread, "pointer_chase runs share one amortized latency");
    }
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
    double slope = sxy / sxx;
    double intercept = my - slope * mx;
    if (slope < 0) {  // noise pushed p negative; fall back to no MLP correction
      slope = 0;
      intercept = my;
    }
    if (!(intercept > 0)) throw Error(Errc::DegenerateMetric, "pointer_chase fit gives q <= 0");
    out.q = opts.q_anchor;
    out.k1 = opts.q_anchor / intercept;
    out.p = slope * out.k1;
  }

  auto residual_after = [&](const std::vector<const CalibrationRun*>& set, bool with_store, bool with_cache) {
    std::vector<double> res;
    for (const auto* r : set) {
      const auto& l = r->pair.local;
      double v = slowdown(r) - out.k1 * metric_dram(l, out);
      if (with_store) v -= out.k3 * metric_store(l);
      if (with_cache) v -= out.k2 * metric_cache(l);
      res.push_back(v);
    }
    return res;
  };

  {
    std::vector<double> m;
    for (const auto* r : store) m.push_back(metric_store(r->pair.local));
    out.k3 = origin_slope(m, residual_after(store, false, false), "store_bound M_store is zero");
  }
  {
    std::vector<double> m;
    for (const auto* r : list) m.push_back(metric_cache(r->pair.local));
    out.k2 = origin_slope(m, residual_after(list, true, false), "list_traversal M_cache is zero");
  }
  if (!mixed.empty()) {
    const auto res = residual_after(mixed, true, true);
    double sum = 0;
    for (double v : res) sum += v;
    out.k4 = sum / static_cast<double>(res.size());
  }
}

}  // namespace


ModelParams fit_least_squares(std::span<const CalibrationRun> input, const ModelParams& init) {
  if (input.size() < 5) throw Error(Errc::EmptyInput, "fit_least_squares needs at least 5 runs");
  const auto runs = canonical(input);
  {
    std::size_t kinds = 1;
    for (std::size_t i = 1; i < runs.size(); ++i) kinds += runs[i].kind != runs[i - 1].kind ? 1 : 0;
    if (kinds < 2) throw Error(Errc::MissingKind, "fit_least_squares needs runs of at least 2 kinds");
  }

  const auto n = static_cast<Eigen::Index>(runs.size());
  Eigen::MatrixXd a(n, 4);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = runs[static_cast<std::size_t>(i)];
    a(i, 0) = metric_dram(r.pair.local, init);
    a(i, 1) = metric_cache(r.pair.local);
    a(i, 2) = metric_store(r.pair.local);
    a(i, 3) = 1.0;
    y(i) = measure_slowdown(r.pair);
  }
  static constexpr const char* kColumns[] = {"M_dram", "M_cache", "M_store", "intercept"};
  for (Eigen::Index c = 0; c < 4; ++c) {
    if (a.col(c).squaredNorm() < kDegenerate) throw Error(Errc::RankDeficient, fmt::format("{} column is zero", kColumns[c]));
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < 4) {
    std::string cols;
    for (Eigen::Index i = qr.rank(); i < 4; ++i) {
      if (!cols.empty()) cols += ", ";
      cols += kColumns[qr.colsPermutation().indices()(i)];
    }
    throw Error(Errc::RankDeficient, "degenerate metric column(s): " + cols);
  }
  const Eigen::VectorXd k = qr.solve(y);

  ModelParams out = init;
  out.k1 = k(0);
  out.k2 = k(1);
  out.k3 = k(2);
  out.k4 = k(3);
  out.validate();
  return out;
}

std::vector<std::pair<double, double>> calibration_points(std::span<const CalibrationRun> runs,
                                                          const ModelParams& params) {
  std::vector<std::pair<double, double>> pts;
  pts.reserve(runs.size());
  for (const auto& r : runs) pts.emplace_back(predict(r.pair.local, params).s_pred, measure_slowdown(r.pair));
  return pts;
}

double fit_residual(std::span<const CalibrationRun> runs, const ModelParams& params) {
  double sum = 0;
  for (const auto& [pred, meas] : calibration_points(runs, params)) sum += (pred - meas) * (pred - meas);
  return sum;
}

std::vector<CalibrationRun> parse_calibration_csv(std::string_view text) {
  const auto table = parse_csv(text);
  const auto kind_col = table.column("kind");
  if (!kind_col) throw Error(Errc::MissingColumn, "kind");
  std::vector<CalibrationRun> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != table.header.size()) throw Error(Errc::MalformedRecord, fmt::format("row {}", r + 1));
    auto kind = parse_microbench_kind(row[*kind_col]);
    if (!kind) throw Error(Errc::MalformedRecord, fmt::format("row {}: unknown kind '{}'", r + 1, row[*kind_col]));
    out.push_back({*kind, runpair_from_row(table.header, row, r + 1)});
  }
  return out;
}

std::string calibration_runs_to_csv(std::span<const CalibrationRun> runs) {
  auto header = runpair_csv_header();
  header.insert(header.begin(), "kind");
  std::string out = join_csv_row(header);
  for (const auto& r : runs) {
    auto cells = runpair_csv_cells(r.pair);
    cells.insert(cells.begin(), std::string(to_string(r.kind)));
    out += join_csv_row(cells);
  }
  return out;
}

std::vector<CalibrationRun> simulate_microbenchmarks(const DeviceProfile& local, const DeviceProfile& remote,
                                                     const ModelParams& truth, const MicrobenchPlan& plan,
                                                     std::uint64_t seed) {
  std::vector<std::pair<MicrobenchKind, WorkloadProfile>> specs;
  for (double mlp : plan.chase_mlp) {
    specs.push_back({MicrobenchKind::PointerChase,
                     {fmt::format("chase-mlp{}", mlp), kRunInstructions, 20, mlp, 0, 0, 0.5, 0.5}});
  }
  // Position of run i within its kind, spread over [0, 1].
  auto spread = [](std::size_t i, std::size_t n) { return n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0; };
  for (std::size_t i = 0; i < plan.store_runs; ++i) {
    const double t = spread(i, plan.store_runs);
    specs.push_back({MicrobenchKind::StoreBound,
                     {fmt::format("store-{}", i), kRunInstructions, 1.0 + 3.0 * t, 2, 0, 0.5 + 0.45 * t, 0.5, 0.5}});
  }
  for (std::size_t i = 0; i < plan.list_runs; ++i) {
    const double t = spread(i, plan.list_runs);
    specs.push_back({MicrobenchKind::ListTraversal,
                     {fmt::format("list-{}", i), kRunInstructions, 0.5 + 1.5 * t, 1, 0.6 + 0.4 * t, 0.02, 0.5, 0.5}});
  }
  const WorkloadRanges mixed_ranges{{1, 20}, {1, 6}, {0, 1}, {0, 0.6}, {0, 5}, kRunInstructions};
  const auto mixed = sample_workloads(mixed_ranges, plan.mixed_runs, derive_seed(seed, 1000), "mixed-");
  for (const auto& w : mixed) specs.push_back({MicrobenchKind::Mixed, w});

  SynthOptions synth;
  synth.sim = plan.sim;
  std::vector<CalibrationRun> out;
  out.reserve(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& [kind, w] = specs[i];
    auto pair = synthesize_runpair(w, local, remote, truth, derive_seed(seed, i), synth);
    if (plan.relative_noise > 0) {
      Rng rng(derive_seed(seed, 5000 + i));
      const double s = measure_slowdown(pair) * (1.0 + plan.relative_noise * rng.normal());
      pair.remote_runtime = *pair.local_runtime * (1.0 + s);
    }
    out.push_back({kind, std::move(pair)});
  }
  return out;
}

}  // namespace suplab
