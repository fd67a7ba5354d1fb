#include "suplab/cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>

#include "suplab/breakdown.hpp"
#include "suplab/calibrate.hpp"
#include "suplab/counters.hpp"
#include "suplab/devmodel.hpp"
#include "suplab/error.hpp"
#include "suplab/interleave.hpp"
#include "suplab/io.hpp"
#include "suplab/model.hpp"
#include "suplab/rng.hpp"
#include "suplab/suites.hpp"
#include "suplab/tiersim.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace suplab::cli {
namespace {

constexpr const char* kVersion = "0.1.0";

// Output directory with a manifest describing how it was produced. Every
// file goes through write_text_atomic; the manifest is written last.
class Outputs {
 public:
  Outputs(fs::path dir, json manifest) : dir_(std::move(dir)), manifest_(std::move(manifest)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error(Errc::Io, "cannot create " + dir_.string() + ": " + ec.message());
  }

  void write(const std::string& name, std::string_view text) {
    const auto path = dir_ / name;
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw Error(Errc::Io, "cannot create " + path.parent_path().string() + ": " + ec.message());
    write_text_atomic(path, text);
    names_.insert(name);
  }

  void finish() {
    manifest_["outputs"] = json(std::vector<std::string>(names_.begin(), names_.end()));
    write_text_atomic(dir_ / "manifest.json", manifest_.dump(2) + "\n");
  }

  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  json manifest_;
  std::set<std::string> names_;
};

struct Common {
  std::uint64_t seed = 1;
  std::string out = "out";
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Seed for every random stream")->capture_default_str();
  cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
}

json base_manifest(const std::string& subcommand, const Common& c) {
  json m;
  m["tool"] = "suplab";
  m["version"] = kVersion;
  m["subcommand"] = subcommand;
  m["seed"] = c.seed;
  m["output_dir"] = c.out;
  m["inputs"] = json::object();
  m["profiles"] = json::object();
  m["params"] = nullptr;
  m["options"] = json::object();
  return m;
}

// A preset name or a path to a device JSON file.
const CLI::Validator kDeviceSpec(
    [](std::string& value) -> std::string {
      if (find_device_preset(value) || fs::is_regular_file(value)) return {};
      return "neither a device preset nor an existing file: " + value;
    },
    "PRESET|FILE");

DeviceProfile load_device(const std::string& spec) {
  if (fs::is_regular_file(spec)) return device_from_json(read_text(spec));
  if (auto d = find_device_preset(spec)) return *d;
  throw Error(Errc::Io, "cannot resolve device " + spec);
}

std::string percent(double v) { return fmt::format("{:.1f}%", 100.0 * v); }

std::string accuracy_csv(const AccuracySummary& a) {
  std::string out = join_csv_row({"metric", "value"});
  out += join_csv_row({"count", fmt_num(static_cast<std::uint64_t>(a.count))});
  out += join_csv_row({"pearson", a.pearson_defined ? fmt_num(a.pearson) : std::string("nan")});
  for (double t : kAccuracyTolerances) out += join_csv_row({"within_" + fmt_num(t), fmt_num(a.within_at(t))});
  return out;
}

std::string cdf_csv(std::span<const RunPair> pairs) {
  std::string out = join_csv_row({"estimate", "p50", "p90", "p95", "p99", "within_0.02", "within_0.05", "within_0.1"});
  for (auto [kind, name] : {std::pair{EstimateKind::Stall, "stall"}, std::pair{EstimateKind::Backend, "backend"}}) {
    const auto cdf = estimate_accuracy(pairs, kind);
    out += join_csv_row({name, fmt_num(cdf.quantile(0.5)), fmt_num(cdf.quantile(0.9)), fmt_num(cdf.quantile(0.95)),
                         fmt_num(cdf.quantile(0.99)), fmt_num(cdf.fraction_within(0.02)),
                         fmt_num(cdf.fraction_within(0.05)), fmt_num(cdf.fraction_within(0.10))});
  }
  return out;
}

std::string calibration_points_csv(std::span<const CalibrationRun> runs, const ModelParams& params) {
  std::string out = join_csv_row({"label", "kind", "predicted", "measured"});
  const auto pts = calibration_points(runs, params);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    out += join_csv_row({runs[i].pair.label, std::string(to_string(runs[i].kind)), fmt_num(pts[i].first),
                         fmt_num(pts[i].second)});
  }
  return out;
}

std::vector<CounterSnapshot> load_counters(const std::string& path) {
  const auto ext = fs::path(path).extension().string();
  return ingest_counter_log(path, iequals(ext, ".json") ? LogFormat::Json : LogFormat::Csv);
}

// ---- ingest -----------------------------------------------------------

struct IngestArgs {
  Common common;
  std::string input;
  std::string input_format = "auto";
  std::string format = "csv";
};

int do_ingest(const IngestArgs& a, std::ostream& out) {
  LogFormat in_fmt = LogFormat::Csv;
  if (a.input_format == "auto") {
    in_fmt = iequals(fs::path(a.input).extension().string(), ".json") ? LogFormat::Json : LogFormat::Csv;
  } else {
    in_fmt = *parse_log_format(a.input_format);
  }
  const auto snaps = ingest_counter_log(a.input, in_fmt);

  auto m = base_manifest("ingest", a.common);
  m["inputs"]["input"] = a.input;
  m["options"]["input_format"] = a.input_format;
  m["options"]["format"] = a.format;
  Outputs o(a.common.out, m);
  if (a.format == "json") {
    o.write("counters.json", counters_to_json(snaps));
  } else {
    o.write("counters.csv", counters_to_csv(snaps));
  }
  std::string fr = join_csv_row({"index", "store", "L1", "L2", "L3", "DRAM"});
  for (std::size_t i = 0; i < snaps.size(); ++i) {
    const auto f = stall_fractions(snaps[i]);
    fr += join_csv_row({fmt_num(static_cast<std::uint64_t>(i)), fmt_num(f.store), fmt_num(f.l1), fmt_num(f.l2),
                        fmt_num(f.l3), fmt_num(f.dram)});
  }
  o.write("stall_fractions.csv", fr);
  o.finish();
  out << fmt::format("ingested {} snapshots -> {}\n", snaps.size(), a.common.out);
  return kExitOk;
}

// ---- breakdown --------------------------------------------------------

struct BreakdownArgs {
  Common common;
  std::string pairs;
};

int do_breakdown(const BreakdownArgs& a, std::ostream& out) {
  const auto pairs = parse_runpair_csv(read_text(a.pairs));
  if (pairs.empty()) throw Error(Errc::EmptyInput, a.pairs + ": no run pairs");
  std::vector<SlowdownReport> reports;
  for (const auto& p : pairs) reports.push_back(decompose(p));

  auto m = base_manifest("breakdown", a.common);
  m["inputs"]["pairs"] = a.pairs;
  Outputs o(a.common.out, m);
  o.write("breakdown.csv", reports_to_csv(reports));
  o.write("breakdown_long.csv", reports_to_long_csv(reports));
  o.write("accuracy.csv", cdf_csv(pairs));
  o.finish();
  const auto cdf = estimate_accuracy(pairs, EstimateKind::Stall);
  out << fmt::format("{} pairs; stall estimate within 5% of measured for {}\n", pairs.size(),
                     percent(cdf.fraction_within(0.05)));
  return kExitOk;
}

// ---- calibrate --------------------------------------------------------

struct CalibrateArgs {
  Common common;
  std::string runs;
  std::string method = "sequential";
  std::string profile = "cxl-a";
  std::string local = "local-emr";
  double noise = 0;
  double q_anchor = 1.0;
  std::optional<double> threshold;
};

int do_calibrate(const CalibrateArgs& a, std::ostream& out) {
  auto m = base_manifest("calibrate", a.common);
  std::vector<CalibrationRun> runs;
  if (!a.runs.empty()) {
    runs = parse_calibration_csv(read_text(a.runs));
    m["inputs"]["runs"] = a.runs;
  } else {
    const auto local = load_device(a.local);
    const auto remote = load_device(a.profile);
    MicrobenchPlan plan;
    plan.relative_noise = a.noise;
    runs = simulate_microbenchmarks(local, remote, reference_params(local, remote), plan, a.common.seed);
    m["profiles"]["local"] = a.local;
    m["profiles"]["remote"] = a.profile;
    m["options"]["noise"] = a.noise;
  }
  m["options"]["method"] = a.method;
  m["options"]["q_anchor"] = a.q_anchor;
  if (a.threshold) m["options"]["threshold"] = *a.threshold;

  FitOptions fo;
  fo.q_anchor = a.q_anchor;
  fo.offcore_threshold = a.threshold;
  ModelParams params = fit_sequential(runs, fo);
  if (a.method == "least-squares") params = fit_least_squares(runs, params);

  Outputs o(a.common.out, m);
  if (a.runs.empty()) o.write("runs.csv", calibration_runs_to_csv(runs));
  o.write("params.json", params_to_json(params));
  o.write("calibration_points.csv", calibration_points_csv(runs, params));
  o.finish();
  out << fmt::format("k1={} k2={} k3={} k4={} p={} q={} threshold={} (residual {})\n", fmt_num(params.k1),
                     fmt_num(params.k2), fmt_num(params.k3), fmt_num(params.k4), fmt_num(params.p),
                     fmt_num(params.q), fmt_num(params.offcore_threshold), fmt_num(fit_residual(runs, params)));
  return kExitOk;
}

// ---- predict ----------------------------------------------------------

struct PredictArgs {
  Common common;
  std::string params;
  std::string pairs;
  std::string counters;
  std::string format = "csv";
};

std::string predictions_json(std::span<const LabeledPrediction> rows) {
  json arr = json::array();
  for (const auto& r : rows) {
    json j;
    j["label"] = r.label;
    j["m_dram"] = r.prediction.m_dram;
    j["m_cache"] = r.prediction.m_cache;
    j["m_store"] = r.prediction.m_store;
    j["s_pred"] = r.prediction.s_pred;
    j["sensitivity"] = to_string(r.prediction.sensitivity);
    arr.push_back(j);
  }
  return arr.dump(2) + "\n";
}

int do_predict(const PredictArgs& a, std::ostream& out) {
  const auto params = params_from_json(read_text(a.params));
  auto m = base_manifest("predict", a.common);
  m["params"] = a.params;
  m["options"]["format"] = a.format;

  std::vector<LabeledPrediction> rows;
  std::vector<std::pair<double, double>> points;
  if (!a.pairs.empty()) {
    m["inputs"]["pairs"] = a.pairs;
    for (const auto& p : parse_runpair_csv(read_text(a.pairs))) {
      rows.push_back({p.label, predict(p.local, params)});
      points.emplace_back(rows.back().prediction.s_pred, measure_slowdown(p));
    }
  } else {
    m["inputs"]["counters"] = a.counters;
    const auto snaps = load_counters(a.counters);
    for (std::size_t i = 0; i < snaps.size(); ++i) rows.push_back({fmt::format("row{}", i), predict(snaps[i], params)});
  }
  if (rows.empty()) throw Error(Errc::EmptyInput, "nothing to predict");

  Outputs o(a.common.out, m);
  if (a.format == "json") {
    o.write("predictions.json", predictions_json(rows));
  } else {
    o.write("predictions.csv", predictions_to_csv(rows));
  }
  if (!points.empty()) {
    const auto acc = evaluate_accuracy(points);
    o.write("accuracy.csv", accuracy_csv(acc));
    out << fmt::format("{} predictions; within 5%: {}; pearson {}\n", rows.size(), percent(acc.within_at(0.05)),
                       acc.pearson_defined ? fmt::format("{:.4f}", acc.pearson) : std::string("undefined"));
  } else {
    out << fmt::format("{} predictions\n", rows.size());
  }
  o.finish();
  return kExitOk;
}

// ---- interleave -------------------------------------------------------

struct InterleaveArgs {
  Common common;
  std::string profile = "cxl-a";
  std::string local = "local-emr";
  std::size_t grid = 101;
  std::string workload;   // scan
  double jitter = 0;      // scan
  std::string workloads;  // fit
  std::size_t count = 8;  // fit, generated suite size
  std::string params;     // fit, forecast
  std::string counters;   // forecast
  std::string fit;        // forecast
};

json interleave_manifest(const std::string& sub, const InterleaveArgs& a) {
  auto m = base_manifest("interleave " + sub, a.common);
  m["profiles"]["local"] = a.local;
  m["profiles"]["remote"] = a.profile;
  m["options"]["grid"] = a.grid;
  return m;
}

int do_scan(const InterleaveArgs& a, std::ostream& out) {
  const auto local = load_device(a.local);
  const auto remote = load_device(a.profile);
  const auto w = workloads_from_json(read_text(a.workload)).front();
  ScanOptions so;
  so.runtime_jitter = a.jitter;
  const auto curve = scan_ratios(w, local, remote, a.grid, a.common.seed, so);

  auto m = interleave_manifest("scan", a);
  m["inputs"]["workload"] = a.workload;
  m["options"]["jitter"] = a.jitter;
  Outputs o(a.common.out, m);
  o.write("scan.csv", scan_to_csv(curve));
  o.finish();
  const auto best = curve[scan_argmin(curve)];
  out << fmt::format("{}: best remote fraction {} (speedup {} over all-local)\n", w.name, fmt_num(best.remote_fraction),
                     percent(scan_speedup(curve)));
  return kExitOk;
}

int do_fit(const InterleaveArgs& a, std::ostream& out) {
  const auto local = load_device(a.local);
  const auto remote = load_device(a.profile);
  const auto params = a.params.empty() ? reference_params(local, remote) : params_from_json(read_text(a.params));
  auto m = interleave_manifest("fit", a);
  std::vector<WorkloadProfile> ws;
  if (!a.workloads.empty()) {
    ws = workloads_from_json(read_text(a.workloads));
    m["inputs"]["workloads"] = a.workloads;
  } else {
    Platform p{remote.name, local, remote, {}};
    p.bandwidth_ranges = local.bandwidth_cap < 100 ? skx_znuma_platform().bandwidth_ranges
                                                   : emr_platform("cxl-a").bandwidth_ranges;
    ws = bandwidth_bound_suite(p, params, a.count, a.common.seed);
    m["options"]["count"] = a.count;
  }
  if (!a.params.empty()) m["params"] = a.params;

  std::vector<InterleaveSample> samples(ws.size());
  for (std::size_t i = 0; i < ws.size(); ++i) {
    samples[i] = observe_interleave(ws[i], local, remote, a.grid, derive_seed(a.common.seed, i));
  }
  const auto fit = fit_interleave(samples, params, a.grid);

  std::string rows = join_csv_row({"label", "r_total", "best_remote_fraction", "best_speedup"});
  for (const auto& s : samples) {
    rows += join_csv_row({s.label, fmt_num(interleave_metric(s.local, params).total()),
                          fmt_num(s.best_remote_fraction), fmt_num(s.best_speedup)});
  }
  Outputs o(a.common.out, m);
  o.write("interleave_fit.json", fit_to_json(fit));
  o.write("fit_samples.csv", rows);
  o.finish();
  out << fmt::format("fitted on {} workloads: ratio = {} * R + {}, speedup = {} * R + {}\n", samples.size(),
                     fmt_num(fit.ratio_slope), fmt_num(fit.ratio_intercept), fmt_num(fit.speedup_slope),
                     fmt_num(fit.speedup_intercept));
  return kExitOk;
}

int do_forecast(const InterleaveArgs& a, std::ostream& out) {
  const auto local = load_device(a.local);
  const auto remote = load_device(a.profile);
  const auto params = params_from_json(read_text(a.params));
  std::optional<InterleaveFit> fit;
  if (!a.fit.empty()) fit = fit_from_json(read_text(a.fit));
  const auto snaps = load_counters(a.counters);
  if (snaps.empty()) throw Error(Errc::EmptyInput, a.counters + ": no snapshots");

  std::vector<std::pair<std::string, InterleaveForecast>> rows;
  for (std::size_t i = 0; i < snaps.size(); ++i) {
    rows.emplace_back(fmt::format("row{}", i), forecast(snaps[i], local, remote, params, fit));
  }
  auto m = interleave_manifest("forecast", a);
  m["inputs"]["counters"] = a.counters;
  m["inputs"]["fit"] = a.fit;
  m["params"] = a.params;
  Outputs o(a.common.out, m);
  o.write("forecast.csv", forecasts_to_csv(rows));
  o.finish();
  const auto n = std::count_if(rows.begin(), rows.end(), [](const auto& r) { return r.second.beneficial; });
  out << fmt::format("{} forecasts, {} beneficial\n", rows.size(), n);
  return kExitOk;
}

// ---- tiersim ----------------------------------------------------------

struct TiersimArgs {
  Common common;
  std::string trace;
  std::string header;
  std::string fixture;
  std::string policy;
  std::string profile = "cxl-a";
  std::string local = "local-emr";
};

std::string safe_name(std::string s) {
  for (auto& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  }
  return s;
}

void write_comparison(Outputs& o, const std::string& prefix, const TierTrace& trace,
                      const std::vector<PolicyConfig>& cfgs, const DeviceProfile& local, const DeviceProfile& remote,
                      std::uint64_t seed, std::ostream& out) {
  std::vector<PolicyOutcome> outcomes;
  const auto rows = compare_policies(trace, cfgs, local, remote, seed, {}, &outcomes);
  o.write(prefix + "comparison.csv", comparison_to_csv(rows));
  for (const auto& oc : outcomes) o.write(prefix + "epochs_" + safe_name(oc.label) + ".csv", epoch_report(oc));
  for (const auto& r : rows) {
    out << fmt::format("  {:<12} normalized {:.4f}  promotions {}\n", r.label, r.normalized, r.promotions);
  }
}

int do_tiersim(const TiersimArgs& a, std::ostream& out) {
  const auto local = load_device(a.local);
  const auto remote = load_device(a.profile);
  auto m = base_manifest("tiersim", a.common);
  m["profiles"]["local"] = a.local;
  m["profiles"]["remote"] = a.profile;

  TierTrace trace;
  std::vector<PolicyConfig> cfgs;
  if (!a.fixture.empty()) {
    const auto fixtures = trace_fixtures(a.common.seed);
    auto it = std::find_if(fixtures.begin(), fixtures.end(), [&](const TraceFixture& f) { return f.name == a.fixture; });
    if (it == fixtures.end()) throw Error(Errc::InvalidParams, "unknown trace fixture '" + a.fixture + "'");
    trace = it->trace;
    cfgs = fixture_policies(*it);
    m["options"]["fixture"] = a.fixture;
  } else {
    const std::string header = a.header.empty() ? fs::path(a.trace).replace_extension(".json").string() : a.header;
    trace = parse_trace(read_text(header), read_text(a.trace));
    m["inputs"]["trace"] = a.trace;
    m["inputs"]["header"] = header;
  }
  if (!a.policy.empty()) {
    cfgs = policies_from_json(read_text(a.policy));
    m["inputs"]["policy"] = a.policy;
  }
  if (cfgs.empty()) throw Error(Errc::EmptyInput, "tiersim needs --policy or --fixture");

  Outputs o(a.common.out, m);
  out << fmt::format("{} epochs, {} misses\n", trace.epochs.size(), trace.miss_count());
  write_comparison(o, "", trace, cfgs, local, remote, a.common.seed, out);
  o.finish();
  return kExitOk;
}

// ---- latcdf -----------------------------------------------------------

struct LatcdfArgs {
  Common common;
  std::string profile = "cxl-b";
  std::size_t n = 1000000;
  double load = 0;
  bool samples = false;
};

inline constexpr double kReportQuantiles[] = {0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 0.999, 0.9999, 0.99999};

int do_latcdf(const LatcdfArgs& a, std::ostream& out) {
  const auto dev = load_device(a.profile);
  const auto s = sample_latencies(dev, a.n, a.load, a.common.seed);
  const auto pct = latency_percentiles(s, kReportQuantiles);

  auto m = base_manifest("latcdf", a.common);
  m["profiles"]["device"] = a.profile;
  m["options"]["n"] = a.n;
  m["options"]["load"] = a.load;
  Outputs o(a.common.out, m);
  o.write("percentiles.csv", percentiles_to_csv(pct));
  if (a.samples) {
    std::string col = "ns\n";
    for (double v : s) col += fmt_num(v) + "\n";
    o.write("samples.csv", col);
  }
  o.finish();
  double p50 = 0, p999 = 0;
  for (const auto& [q, v] : pct) {
    if (q == 0.5) p50 = v;
    if (q == 0.999) p999 = v;
  }
  out << fmt::format("{}: p50 {:.1f} ns, p99.9 - p50 = {:.1f} ns\n", dev.name, p50, p999 - p50);
  return kExitOk;
}

// ---- demo -------------------------------------------------------------

int do_demo(const Common& c, std::ostream& out) {
  auto m = base_manifest("demo", c);
  Outputs o(c.out, m);
  const auto platform = emr_platform("cxl-a");
  const auto truth = reference_params(platform.local, platform.remote);
  std::string summary;
  auto line = [&](const std::string& s) {
    summary += s + "\n";
    out << s << "\n";
  };

  // calibrate
  MicrobenchPlan plan;
  plan.relative_noise = 0.02;
  const auto runs = simulate_microbenchmarks(platform.local, platform.remote, truth, plan, derive_seed(c.seed, 1));
  const auto params = fit_sequential(runs);
  o.write("calibrate/runs.csv", calibration_runs_to_csv(runs));
  o.write("calibrate/params.json", params_to_json(params));
  o.write("calibrate/calibration_points.csv", calibration_points_csv(runs, params));
  line(fmt::format("calibrate   k1 {:.4f} (truth {:.4f}), k2 {:.4f} ({:.4f}), k3 {:.4f} ({:.4f}), p {:.2f} ({:.2f})",
                   params.k1, truth.k1, params.k2, truth.k2, params.k3, truth.k3, params.p, truth.p));

  // predict + breakdown
  const auto suite = accuracy_suite(platform, 150, 0.03, derive_seed(c.seed, 2));
  std::vector<LabeledPrediction> preds;
  std::vector<SlowdownReport> reports;
  for (const auto& p : suite.pairs) {
    preds.push_back({p.label, predict(p.local, suite.fitted)});
    reports.push_back(decompose(p));
  }
  const auto acc = evaluate_accuracy(suite.dram_points);
  o.write("predict/pairs.csv", runpairs_to_csv(suite.pairs));
  o.write("predict/predictions.csv", predictions_to_csv(preds));
  o.write("predict/dram_accuracy.csv", accuracy_csv(acc));
  o.write("breakdown/breakdown.csv", reports_to_csv(reports));
  o.write("breakdown/accuracy.csv", cdf_csv(suite.pairs));
  const auto cdf = estimate_accuracy(suite.pairs, EstimateKind::Stall);
  line(fmt::format("predict     DRAM slowdown within 5%: {}, pearson {:.4f} over {} workloads",
                   percent(acc.within_at(0.05)), acc.pearson, acc.count));
  line(fmt::format("breakdown   stall estimate within 5% of measured: {}", percent(cdf.fraction_within(0.05))));

  // interleave
  const auto bw = bandwidth_bound_suite(platform, params, 12, derive_seed(c.seed, 3));
  std::vector<InterleaveSample> samples(bw.size());
  for (std::size_t i = 0; i < bw.size(); ++i) {
    samples[i] = observe_interleave(bw[i], platform.local, platform.remote, 101, derive_seed(c.seed, 100 + i));
  }
  const std::span<const InterleaveSample> train(samples.data(), 6);
  const std::span<const InterleaveSample> test(samples.data() + 6, samples.size() - 6);
  const auto fit = fit_interleave(train, params);
  std::vector<std::pair<std::string, InterleaveForecast>> fc;
  double worst_ratio = 0, worst_speedup = 0;
  for (const auto& s : test) {
    const auto f = forecast(s.local, platform.local, platform.remote, params, fit);
    worst_ratio = std::max(worst_ratio, std::abs(f.best_ratio.remote_fraction - s.best_remote_fraction));
    worst_speedup = std::max(worst_speedup, std::abs(f.predicted_speedup - s.best_speedup));
    fc.emplace_back(s.label, f);
  }
  o.write("interleave/interleave_fit.json", fit_to_json(fit));
  o.write("interleave/forecast.csv", forecasts_to_csv(fc));
  o.write("interleave/scan.csv", scan_to_csv(scan_ratios(bw.front(), platform.local, platform.remote, 101, c.seed)));
  line(fmt::format("interleave  held-out forecasts: ratio off by <= {:.0f} grid points, speedup off by <= {:.1f} points",
                   worst_ratio * 100, worst_speedup * 100));

  // tiersim
  for (const auto& fx : trace_fixtures(derive_seed(c.seed, 4))) {
    std::vector<PolicyOutcome> outcomes;
    const auto rows = compare_policies(fx.trace, fixture_policies(fx), platform.local, platform.remote, c.seed, {},
                                       &outcomes);
    o.write("tiersim/" + fx.name + "/comparison.csv", comparison_to_csv(rows));
    for (const auto& oc : outcomes) o.write("tiersim/" + fx.name + "/epochs_" + safe_name(oc.label) + ".csv", epoch_report(oc));
    std::string parts;
    for (const auto& r : rows) parts += fmt::format(" {} {:.3f}", r.label, r.normalized);
    line(fmt::format("tiersim     {}:{}", fx.name, parts));
  }
  o.write("summary.txt", summary);
  o.finish();
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Far-memory slowdown analysis: counter ingestion, stall breakdown, slowdown model, interleaving and tiering simulation"};
  app.name("suplab");
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Validate and normalize a counter log");
  add_common(c_ingest, ingest.common);
  c_ingest->add_option("--input", ingest.input, "Counter log (CSV or JSON)")->required()->check(CLI::ExistingFile);
  c_ingest->add_option("--input-format", ingest.input_format)->check(CLI::IsMember({"auto", "csv", "json"}))->capture_default_str();
  c_ingest->add_option("--format", ingest.format, "Output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();

  BreakdownArgs breakdown;
  auto* c_breakdown = app.add_subcommand("breakdown", "Split measured slowdown by stall source");
  add_common(c_breakdown, breakdown.common);
  c_breakdown->add_option("--pairs", breakdown.pairs, "Run-pair CSV")->required()->check(CLI::ExistingFile);

  CalibrateArgs calibrate;
  auto* c_calibrate = app.add_subcommand("calibrate", "Fit model constants from microbenchmark runs");
  add_common(c_calibrate, calibrate.common);
  c_calibrate->add_option("--runs", calibrate.runs, "Calibration run CSV; omit to simulate microbenchmarks")->check(CLI::ExistingFile);
  c_calibrate->add_option("--method", calibrate.method)->check(CLI::IsMember({"sequential", "least-squares"}))->capture_default_str();
  c_calibrate->add_option("--profile", calibrate.profile, "Far-memory device when simulating")->check(kDeviceSpec)->capture_default_str();
  c_calibrate->add_option("--local", calibrate.local, "Local device when simulating")->check(kDeviceSpec)->capture_default_str();
  c_calibrate->add_option("--noise", calibrate.noise, "Relative slowdown noise when simulating")->check(CLI::Range(0.0, 1.0));
  c_calibrate->add_option("--q-anchor", calibrate.q_anchor, "Value q is pinned to")->check(CLI::PositiveNumber)->capture_default_str();
  c_calibrate->add_option("--threshold", calibrate.threshold, "Sensitivity threshold in cycles (default: derived from pointer chases)");

  PredictArgs predict_args;
  auto* c_predict = app.add_subcommand("predict", "Predict far-memory slowdown from local counters");
  add_common(c_predict, predict_args.common);
  c_predict->add_option("--params", predict_args.params, "Model constants JSON")->required()->check(CLI::ExistingFile);
  auto* o_pairs = c_predict->add_option("--pairs", predict_args.pairs, "Run-pair CSV (adds accuracy against measured)")->check(CLI::ExistingFile);
  auto* o_counters = c_predict->add_option("--counters", predict_args.counters, "Counter log of local runs")->check(CLI::ExistingFile);
  o_pairs->excludes(o_counters);
  c_predict->add_option("--format", predict_args.format)->check(CLI::IsMember({"csv", "json"}))->capture_default_str();

  InterleaveArgs il;
  auto* c_il = app.add_subcommand("interleave", "Weighted interleaving: scan, fit, forecast");
  c_il->require_subcommand(1);
  auto add_devices = [&](CLI::App* cmd) {
    add_common(cmd, il.common);
    cmd->add_option("--profile", il.profile, "Far-memory device")->check(kDeviceSpec)->capture_default_str();
    cmd->add_option("--local", il.local, "Local device")->check(kDeviceSpec)->capture_default_str();
  };
  auto* c_scan = c_il->add_subcommand("scan", "Simulated runtime over remote fractions");
  add_devices(c_scan);
  c_scan->add_option("--workload", il.workload, "Workload profile JSON")->required()->check(CLI::ExistingFile);
  c_scan->add_option("--grid", il.grid)->check(CLI::Range(2, 100001))->capture_default_str();
  c_scan->add_option("--jitter", il.jitter, "Relative runtime noise per grid point")->check(CLI::Range(0.0, 1.0));
  auto* c_fit = c_il->add_subcommand("fit", "Fit R -> ratio/speedup lines from scanned workloads");
  add_devices(c_fit);
  c_fit->add_option("--workloads", il.workloads, "Workload profiles JSON; omit to generate bandwidth-bound ones")->check(CLI::ExistingFile);
  c_fit->add_option("--count", il.count, "Generated workloads")->check(CLI::Range(3, 10000))->capture_default_str();
  c_fit->add_option("--params", il.params, "Model constants JSON (default: reference constants)")->check(CLI::ExistingFile);
  c_fit->add_option("--grid", il.grid)->check(CLI::Range(2, 100001))->capture_default_str();
  auto* c_fc = c_il->add_subcommand("forecast", "Best-shot ratio from one local run");
  add_devices(c_fc);
  c_fc->add_option("--counters", il.counters, "Counter log of local runs")->required()->check(CLI::ExistingFile);
  c_fc->add_option("--params", il.params, "Model constants JSON")->required()->check(CLI::ExistingFile);
  c_fc->add_option("--fit", il.fit, "Interleave fit JSON")->check(CLI::ExistingFile);

  TiersimArgs ts;
  auto* c_ts = app.add_subcommand("tiersim", "Compare tiering policies on a page trace");
  add_common(c_ts, ts.common);
  auto* o_trace = c_ts->add_option("--trace", ts.trace, "Trace CSV (epoch,page_id,group_size)")->check(CLI::ExistingFile);
  c_ts->add_option("--header", ts.header, "Trace header JSON (default: trace path with .json)")->check(CLI::ExistingFile);
  auto* o_fixture = c_ts->add_option("--fixture", ts.fixture, "Built-in trace")
                        ->check(CLI::IsMember({"tc-twitter-like", "gpt2-like", "tc-kron-like"}));
  o_trace->excludes(o_fixture);
  c_ts->add_option("--policy", ts.policy, "Policy config JSON (object or array)")->check(CLI::ExistingFile);
  c_ts->add_option("--profile", ts.profile, "Slow-tier device")->check(kDeviceSpec)->capture_default_str();
  c_ts->add_option("--local", ts.local, "Fast-tier device")->check(kDeviceSpec)->capture_default_str();

  LatcdfArgs lat;
  auto* c_lat = app.add_subcommand("latcdf", "Latency percentiles of a device");
  add_common(c_lat, lat.common);
  c_lat->add_option("--profile", lat.profile, "Device")->check(kDeviceSpec)->capture_default_str();
  c_lat->add_option("--n", lat.n, "Samples")->check(CLI::Range(std::size_t{1}, std::size_t{1} << 32))->capture_default_str();
  c_lat->add_option("--load", lat.load, "Utilization")->check(CLI::Range(0.0, 0.999999));
  c_lat->add_flag("--samples", lat.samples, "Also write every sample");

  Common demo;
  auto* c_demo = app.add_subcommand("demo", "End-to-end pipeline on built-in fixtures");
  add_common(c_demo, demo);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (c_ts->parsed() && ts.trace.empty() && ts.fixture.empty()) {
    err << "tiersim: one of --trace or --fixture is required\n";
    return kExitUsage;
  }
  if (c_predict->parsed() && predict_args.pairs.empty() && predict_args.counters.empty()) {
    err << "predict: one of --pairs or --counters is required\n";
    return kExitUsage;
  }

  try {
    if (c_ingest->parsed()) return do_ingest(ingest, out);
    if (c_breakdown->parsed()) return do_breakdown(breakdown, out);
    if (c_calibrate->parsed()) return do_calibrate(calibrate, out);
    if (c_predict->parsed()) return do_predict(predict_args, out);
    if (c_scan->parsed()) return do_scan(il, out);
    if (c_fit->parsed()) return do_fit(il, out);
    if (c_fc->parsed()) return do_forecast(il, out);
    if (c_ts->parsed()) return do_tiersim(ts, out);
    if (c_lat->parsed()) return do_latcdf(lat, out);
    if (c_demo->parsed()) return do_demo(demo, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace suplab::cli
