#include <algorithm>
#include <random>

#include "../support.hpp"
#include "suplab/breakdown.hpp"
#include "suplab/calibrate.hpp"

namespace suplab {
namespace {

using test::rel_err;

struct Platform {
  DeviceProfile local = *find_device_preset("local-emr");
  DeviceProfile remote = *find_device_preset("cxl-a");
};

ModelParams truth_params(double k1, double k2, double k3, double k4, double p, double q) {
  ModelParams m;
  m.k1 = k1;
  m.k2 = k2;
  m.k3 = k3;
  m.k4 = k4;
  m.p = p;
  m.q = q;
  return m;
}

void expect_recovered(const ModelParams& got, const ModelParams& want, double tol) {
  EXPECT_LT(rel_err(got.k1, want.k1), tol) << got.k1;
  EXPECT_LT(rel_err(got.k2, want.k2), tol) << got.k2;
  EXPECT_LT(rel_err(got.k3, want.k3), tol) << got.k3;
  EXPECT_LT(rel_err(got.p, want.p), tol) << got.p;
  EXPECT_LT(rel_err(got.q, want.q), tol) << got.q;
  if (want.k4 != 0) EXPECT_LT(rel_err(got.k4, want.k4), tol) << got.k4;
}

TEST(Calibrate, NoiselessRoundTrip) {
  const Platform pf;
  const auto truth = truth_params(0.8, 1.2, 1.5, 0, 0.01, 0.15);
  MicrobenchPlan plan;
  plan.mixed_runs = 0;
  const auto runs = simulate_microbenchmarks(pf.local, pf.remote, truth, plan, 1);
  FitOptions opts;
  opts.q_anchor = truth.q;
  const auto got = fit_sequential(runs, opts);
  expect_recovered(got, truth, 1e-9);
  EXPECT_EQ(got.k4, 0.0);
}

TEST(Calibrate, NoiselessRoundTripWithMixedRuns) {
  const Platform pf;
  const auto truth = truth_params(0.9, 1.7, 0.8, 0.05, 30, 1.5);
  const auto runs = simulate_microbenchmarks(pf.local, pf.remote, truth, {}, 2);
  FitOptions opts;
  opts.q_anchor = truth.q;
  expect_recovered(fit_sequential(runs, opts), truth, 1e-9);
}

// Hand-built pair with P4/P1 = dram, M_cache = cache, M_store = store and slowdown s.
RunPair hand_pair(const std::string& label, double dram, double cache, double store, double s) {
  CounterSnapshot l;
  l.total_cycles = 1'000'000;
  l.instructions = 1'000'000;
  l.llc_miss_demand_stall_cycles = static_cast<std::uint64_t>(dram * 1e6);
  l.store_buffer_full_stall_cycles = static_cast<std::uint64_t>(store * 1e6);
  l.mem_stall_cycles = l.llc_miss_demand_stall_cycles + static_cast<std::uint64_t>(cache * 1e6);
  l.backend_stall_cycles = l.stall_cycles_total = l.mem_stall_cycles + l.store_buffer_full_stall_cycles;
  if (cache > 0) {
    l.l1_demand_hits = 0;
    l.lfb_hits = 1;
    l.l1_prefetch_l3_miss = l.l1_prefetch_total = 1;
    l.l2_prefetch_l3_miss = 1;
  }
  l.offcore_demand_requests = 1000;
  l.offcore_demand_occupancy = 300'000;
  return {label, l, l, 1.0, 1.0 + s};
}

TEST(Calibrate, SingleChaseIsOneDivision) {
  const std::vector<CalibrationRun> runs{
      {MicrobenchKind::PointerChase, hand_pair("chase", 0.5, 0, 0, 0.4)},
      {MicrobenchKind::StoreBound, hand_pair("store", 0, 0, 0.2, 0.3)},
      {MicrobenchKind::ListTraversal, hand_pair("list", 0, 0.1, 0, 0.1)},
  };
  FitOptions opts;
  opts.fixed_pq = {0.0, 1.0};
  const auto got = fit_sequential(runs, opts);
  EXPECT_NEAR(got.k1, 0.8, 1e-12);
  EXPECT_NEAR(got.k3, 1.5, 1e-12);
  EXPECT_NEAR(got.k2, 1.0, 1e-12);
}

TEST(Calibrate, MissingKinds) {
  const Platform pf;
  auto runs = simulate_microbenchmarks(pf.local, pf.remote, truth_params(1, 1, 1, 0, 20, 1), {}, 3);
  for (auto kind : {MicrobenchKind::PointerChase, MicrobenchKind::StoreBound, MicrobenchKind::ListTraversal}) {
    std::vector<CalibrationRun> subset;
    std::copy_if(runs.begin(), runs.end(), std::back_inserter(subset), [&](const auto& r) { return r.kind != kind; });
    EXPECT_ERRC(fit_sequential(subset), Errc::MissingKind);
  }
}

TEST(Calibrate, SingleMlpLevelIsUnidentifiable) {
  const Platform pf;
  MicrobenchPlan plan;
  plan.chase_mlp = {4, 4, 4};
  const auto runs = simulate_microbenchmarks(pf.local, pf.remote, truth_params(1, 1, 1, 0, 20, 1), plan, 4);
  EXPECT_ERRC(fit_sequential(runs), Errc::InsufficientMlpSpread);
}

TEST(Calibrate, ImpureChaseRejected) {
  std::vector<CalibrationRun> runs{
      {MicrobenchKind::PointerChase, hand_pair("chase", 0.5, 0, 0.1, 0.4)},
      {MicrobenchKind::StoreBound, hand_pair("store", 0, 0, 0.2, 0.3)},
      {MicrobenchKind::ListTraversal, hand_pair("list", 0, 0.1, 0, 0.1)},
  };
  EXPECT_ERRC(fit_sequential(runs), Errc::InvariantViolation);
}

TEST(Calibrate, DegenerateStoreMetric) {
  std::vector<CalibrationRun> runs{
      {MicrobenchKind::PointerChase, hand_pair("chase", 0.5, 0, 0, 0.4)},
      {MicrobenchKind::StoreBound, hand_pair("store", 0, 0, 0, 0.3)},
      {MicrobenchKind::ListTraversal, hand_pair("list", 0, 0.1, 0, 0.1)},
  };
  FitOptions opts;
  opts.fixed_pq = {0.0, 1.0};
  EXPECT_ERRC(fit_sequential(runs, opts), Errc::DegenerateMetric);
}

TEST(Calibrate, NoisyMedianRecovery) {
  const Platform pf;
  const auto truth = truth_params(0.9, 1.7, 0.8, 0.05, 30, 1.5);
  MicrobenchPlan plan;
  plan.relative_noise = 0.02;
  FitOptions opts;
  opts.q_anchor = truth.q;
  std::vector<double> e1, e2, e3;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto got = fit_sequential(simulate_microbenchmarks(pf.local, pf.remote, truth, plan, seed), opts);
    e1.push_back(rel_err(got.k1, truth.k1));
    e2.push_back(rel_err(got.k2, truth.k2));
    e3.push_back(rel_err(got.k3, truth.k3));
  }
  for (auto* e : {&e1, &e2, &e3}) {
    std::nth_element(e->begin(), e->begin() + e->size() / 2, e->end());
    EXPECT_LT((*e)[e->size() / 2], 0.05);
  }
}

TEST(Calibrate, PermutationInvariant) {
  const Platform pf;
  MicrobenchPlan plan;
  plan.relative_noise = 0.02;
  auto runs = simulate_microbenchmarks(pf.local, pf.remote, truth_params(0.9, 1.7, 0.8, 0.05, 30, 1.5), plan, 9);
  const auto a = fit_sequential(runs);
  std::mt19937 g(3);
  std::shuffle(runs.begin(), runs.end(), g);
  EXPECT_EQ(fit_sequential(runs), a);
  EXPECT_EQ(fit_least_squares(runs, a), fit_least_squares(std::vector<CalibrationRun>(runs.rbegin(), runs.rend()), a));
}

TEST(Calibrate, LeastSquaresNeverWorse) {
  const Platform pf;
  MicrobenchPlan plan;
  plan.relative_noise = 0.02;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto runs = simulate_microbenchmarks(pf.local, pf.remote, truth_params(0.9, 1.7, 0.8, 0.05, 30, 1.5), plan, seed);
    const auto seq = fit_sequential(runs);
    const auto ls = fit_least_squares(runs, seq);
    EXPECT_LE(fit_residual(runs, ls), fit_residual(runs, seq) * (1 + 1e-12));
    EXPECT_EQ(ls.p, seq.p);
    EXPECT_EQ(ls.q, seq.q);

    std::vector<std::pair<double, double>> a = calibration_points(runs, seq), b = calibration_points(runs, ls);
    EXPECT_GE(evaluate_accuracy(b).within_at(0.05), evaluate_accuracy(a).within_at(0.05));
  }
}

TEST(Calibrate, LeastSquaresExactAffine) {
  const Platform pf;
  const auto truth = truth_params(0.9, 1.7, 0.8, 0.05, 30, 1.5);
  const auto runs = simulate_microbenchmarks(pf.local, pf.remote, truth, {}, 5);
  const auto ls = fit_least_squares(runs, truth);
  EXPECT_LT(fit_residual(runs, ls), 1e-20);
  expect_recovered(ls, truth, 1e-9);
}

TEST(Calibrate, LeastSquaresResidualRms) {
  const Platform pf;
  const auto truth = truth_params(0.9, 1.7, 0.8, 0.05, 30, 1.5);
  MicrobenchPlan plan;
  plan.chase_mlp = {1, 4};
  plan.store_runs = plan.list_runs = 2;
  plan.mixed_runs = 44;
  plan.relative_noise = 0.01;
  const auto runs = simulate_microbenchmarks(pf.local, pf.remote, truth, plan, 6);
  ASSERT_EQ(runs.size(), 50u);
  const auto ls = fit_least_squares(runs, truth);
  EXPECT_LE(std::sqrt(fit_residual(runs, ls) / 50.0), 0.015);
}

TEST(Calibrate, LeastSquaresRankDeficient) {
  std::vector<CalibrationRun> runs;
  for (int i = 1; i <= 6; ++i) {
    runs.push_back({i % 2 ? MicrobenchKind::PointerChase : MicrobenchKind::Mixed,
                    hand_pair("r" + std::to_string(i), 0.1 * i, 0, 0, 0.05 * i)});
  }
  try {
    fit_least_squares(runs, truth_params(1, 1, 1, 0, 0, 1));
    ADD_FAILURE() << "expected RankDeficient";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::RankDeficient);
    EXPECT_NE(std::string(e.what()).find("M_cache"), std::string::npos) << e.what();
  }
  EXPECT_ERRC(fit_least_squares(std::span(runs).first(4), truth_params(1, 1, 1, 0, 0, 1)), Errc::EmptyInput);
}

TEST(Calibrate, RunsCsvRoundTrip) {
  const Platform pf;
  const auto runs = simulate_microbenchmarks(pf.local, pf.remote, truth_params(1, 1, 1, 0, 20, 1), {}, 7);
  const auto back = parse_calibration_csv(calibration_runs_to_csv(runs));
  ASSERT_EQ(back.size(), runs.size());
  for (std::size_t i = 0; i < runs.size(); ++i) {
    EXPECT_EQ(back[i].kind, runs[i].kind);
    EXPECT_EQ(back[i].pair.local, runs[i].pair.local);
    EXPECT_EQ(back[i].pair.remote_runtime, runs[i].pair.remote_runtime);
  }
  EXPECT_EQ(fit_sequential(back), fit_sequential(runs));
}

}  // namespace
}  // namespace suplab
