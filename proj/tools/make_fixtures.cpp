// Regenerates the shipped profiles/ and fixtures/ trees.
//   suplab_make_fixtures <repo-root>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <iostream>

#include "suplab/calibrate.hpp"
#include "suplab/io.hpp"
#include "suplab/suites.hpp"
#include "suplab/tiersim.hpp"

namespace fs = std::filesystem;
using namespace suplab;

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: suplab_make_fixtures <repo-root>\n";
    return 1;
  }
  const fs::path root = argv[1];
  fs::create_directories(root / "profiles");
  fs::create_directories(root / "fixtures");

  for (const auto& d : device_presets()) write_text_atomic(root / "profiles" / (d.name + ".json"), device_to_json(d));

  const auto platform = emr_platform("cxl-a");
  const auto truth = reference_params(platform.local, platform.remote);

  MicrobenchPlan plan;
  plan.relative_noise = 0.02;
  const auto runs = simulate_microbenchmarks(platform.local, platform.remote, truth, plan, 11);
  write_text_atomic(root / "fixtures/runs.csv", calibration_runs_to_csv(runs));
  const auto params = fit_sequential(runs);
  write_text_atomic(root / "fixtures/params.json", params_to_json(params));

  const auto suite = accuracy_suite(platform, 200, 0.0, 12);
  write_text_atomic(root / "fixtures/pairs.csv", runpairs_to_csv(suite.pairs));
  std::vector<CounterSnapshot> locals;
  for (std::size_t i = 0; i < 20; ++i) locals.push_back(suite.pairs[i].local);
  write_text_atomic(root / "fixtures/counters.csv", counters_to_csv(locals));
  write_text_atomic(root / "fixtures/counters.json", counters_to_json(locals));
  write_text_atomic(root / "fixtures/counters3.csv", counters_to_csv(std::span(locals).first(3)));

  const auto bw = bandwidth_bound_suite(platform, params, 12, 13);
  write_text_atomic(root / "fixtures/workload.json", workload_to_json(bw.front()));
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& w : bw) arr.push_back(nlohmann::ordered_json::parse(workload_to_json(w)));
  write_text_atomic(root / "fixtures/workloads.json", arr.dump(2) + "\n");
  std::vector<CounterSnapshot> bw_locals;
  for (const auto& w : bw) bw_locals.push_back(synthesize_snapshot(w, platform.local, platform.remote, 0.0));
  write_text_atomic(root / "fixtures/bw_counters.csv", counters_to_csv(bw_locals));

  // Small two-phase trace: overlapped misses over a wide set, then a hot set with no overlap.
  const TracePhase phases[] = {{10, 500, 0, 3000, 8}, {6, 500, 3000, 200, 1}};
  const TraceFixture fx{"two-phase", generate_trace(3200, phases, 14), 1000, 64};
  write_text_atomic(root / "fixtures/two-phase.csv", trace_body_to_csv(fx.trace));
  write_text_atomic(root / "fixtures/two-phase.json", trace_header_to_json(fx.trace));
  nlohmann::ordered_json pol = nlohmann::ordered_json::array();
  for (const auto& c : fixture_policies(fx)) pol.push_back(nlohmann::ordered_json::parse(policy_to_json(c)));
  write_text_atomic(root / "fixtures/policies.json", pol.dump(2) + "\n");

  fmt::print("wrote profiles/ and fixtures/ under {}\n", root.string());
  return 0;
}
