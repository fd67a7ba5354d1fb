#include <algorithm>
#include <numeric>

#include "../support.hpp"
#include "suplab/tiersim.hpp"

namespace suplab {
namespace {

const DeviceProfile kLocal = *find_device_preset("local-emr");
const DeviceProfile kRemote = *find_device_preset("cxl-a");

PolicyConfig config(Policy p, std::uint64_t capacity, std::uint64_t cap = 64) {
  PolicyConfig c;
  c.policy = p;
  c.fast_capacity = capacity;
  c.max_promo_rate = cap;
  return c;
}

std::vector<PolicyConfig> all_policies(std::uint64_t capacity, std::uint64_t cap = 64) {
  return {config(Policy::FirstTouch, capacity, cap), config(Policy::Tpp, capacity, cap),
          config(Policy::Alto, capacity, cap)};
}

TierTrace small_trace(std::uint64_t seed) {
  const TracePhase phases[] = {{8, 400, 0, 1500, 4}, {8, 400, 1000, 600, 1}};
  return generate_trace(1600, phases, seed);
}

std::uint64_t sum(const std::vector<std::uint64_t>& v, std::size_t from, std::size_t to) {
  return std::accumulate(v.begin() + static_cast<std::ptrdiff_t>(from), v.begin() + static_cast<std::ptrdiff_t>(to),
                         std::uint64_t{0});
}

TEST(Tiersim, GateSteps) {
  EXPECT_EQ(alto_gate(39.999, 40, 100, 5), 0.0);
  EXPECT_EQ(alto_gate(100, 40, 100, 5), 1.0);
  EXPECT_EQ(alto_gate(1e6, 40, 100, 5), 1.0);
  std::vector<double> seen;
  for (double lat = 30; lat <= 110; lat += 0.5) {
    const double g = alto_gate(lat, 40, 100, 5);
    if (seen.empty() || seen.back() != g) seen.push_back(g);
  }
  EXPECT_EQ(seen, (std::vector<double>{0, 0.2, 0.4, 0.6, 0.8, 1.0}));
  EXPECT_EQ(alto_gate_level(40, 40, 100, 5), 1u);
  EXPECT_EQ(alto_gate_level(54.99, 40, 100, 5), 1u);
  EXPECT_EQ(alto_gate_level(55, 40, 100, 5), 2u);
  EXPECT_EQ(alto_gate_level(99.99, 40, 100, 5), 4u);
}

TEST(Tiersim, GateMonotone) {
  double prev = 0;
  for (double lat = 0; lat < 200; lat += 0.25) {
    const double g = alto_gate(lat, 40, 100, 5);
    EXPECT_GE(g, prev);
    prev = g;
  }
}

TEST(Tiersim, FastOnlyTraceIsPolicyIndependent) {
  const TracePhase phases[] = {{5, 300, 0, 100, 2}};
  const auto trace = generate_trace(100, phases, 1);
  const auto rows = compare_policies(trace, all_policies(100), kLocal, kRemote, 1);
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.runtime, rows[0].runtime) << r.label;
    EXPECT_EQ(r.normalized, 1.0);
    EXPECT_EQ(r.promotions, 0u);
    EXPECT_EQ(r.demotions, 0u);
  }
}

TEST(Tiersim, BaselineAgainstItself) {
  const auto trace = small_trace(2);
  PolicyConfig all_fast = config(Policy::FirstTouch, trace.page_count);
  const auto rows = compare_policies(trace, std::span(&all_fast, 1), kLocal, kRemote, 1);
  EXPECT_EQ(rows[1].normalized, 1.0);
}

TEST(Tiersim, TppPeaksAtCap) {
  const TracePhase phases[] = {{10, 5000, 0, 4000, 1}};
  const auto trace = generate_trace(4000, phases, 3);
  const auto out = simulate(trace, config(Policy::Tpp, 500, 96), kLocal, kRemote, 1);
  EXPECT_EQ(*std::max_element(out.promo_rate_series.begin(), out.promo_rate_series.end()), 96u);
}

TEST(Tiersim, CapacityConservation) {
  const auto trace = small_trace(4);
  for (const auto& c : all_policies(300)) {
    EXPECT_LE(simulate(trace, c, kLocal, kRemote, 1).max_fast_resident, 300u);
  }
}

TEST(Tiersim, AltoNeverPromotesMoreThanTpp) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto trace = small_trace(seed);
    const auto tpp = simulate(trace, config(Policy::Tpp, 300), kLocal, kRemote, seed);
    const auto alto = simulate(trace, config(Policy::Alto, 300), kLocal, kRemote, seed);
    EXPECT_LE(alto.promotions, tpp.promotions);
  }
}

TEST(Tiersim, Deterministic) {
  const auto trace = small_trace(5);
  const auto a = simulate(trace, config(Policy::Alto, 300), kLocal, kRemote, 9);
  const auto b = simulate(trace, config(Policy::Alto, 300), kLocal, kRemote, 9);
  EXPECT_EQ(a.simulated_runtime, b.simulated_runtime);
  EXPECT_EQ(a.promo_rate_series, b.promo_rate_series);
  EXPECT_EQ(a.amortized_latency_series, b.amortized_latency_series);
  EXPECT_EQ(epoch_report(a), epoch_report(b));
}

TEST(Tiersim, FreeMigrationHelpsStableHotSet) {
  // Cold pages fill the fast tier first; a stable hot set then runs from the slow tier.
  const TracePhase phases[] = {{1, 1000, 0, 1000, 1}, {20, 2000, 1000, 200, 1}};
  const auto trace = generate_trace(1200, phases, 6);
  auto tpp = config(Policy::Tpp, 300, 64);
  auto ft = config(Policy::FirstTouch, 300, 64);
  tpp.migration_cost_us = ft.migration_cost_us = 0;
  for (std::uint64_t cap : {250u, 600u}) {
    tpp.fast_capacity = ft.fast_capacity = cap;
    EXPECT_LE(simulate(trace, tpp, kLocal, kRemote, 1).simulated_runtime,
              simulate(trace, ft, kLocal, kRemote, 1).simulated_runtime);
  }
}

TEST(Tiersim, TwitterLikePhases) {
  const auto fx = twitter_like_fixture(1);
  const auto cfgs = fixture_policies(fx);
  const auto tpp = simulate(fx.trace, cfgs[1], kLocal, kRemote, 1);
  const auto alto = simulate(fx.trace, cfgs[2], kLocal, kRemote, 1);
  const auto ft = simulate(fx.trace, cfgs[0], kLocal, kRemote, 1);
  // Phase 1 is the first 40 epochs.
  EXPECT_EQ(sum(alto.promo_rate_series, 0, 40), 0u);
  EXPECT_EQ(tpp.promo_rate_series[5], fx.max_promo_rate);
  for (std::size_t e = 0; e < 40; ++e) EXPECT_LT(alto.amortized_latency_series[e], 40.0);
  for (std::size_t e = 40; e < 60; ++e) EXPECT_GT(alto.amortized_latency_series[e], 100.0);
  EXPECT_LT(alto.simulated_runtime, tpp.simulated_runtime);
  EXPECT_LE(alto.simulated_runtime, 1.06 * ft.simulated_runtime);
}

TEST(Tiersim, Gpt2LikeAltoBeatsTpp) {
  const auto fx = gpt2_like_fixture(1);
  const auto rows = compare_policies(fx.trace, fixture_policies(fx), kLocal, kRemote, 1);
  EXPECT_GE(rows[2].runtime / rows[3].runtime, 1.5);
}

TEST(Tiersim, KronLikeAltoMatchesTpp) {
  const auto fx = kron_like_fixture(1);
  const auto rows = compare_policies(fx.trace, fixture_policies(fx), kLocal, kRemote, 1);
  EXPECT_NEAR(rows[3].runtime / rows[2].runtime, 1.0, 0.05);
}

TEST(Tiersim, EpochReport) {
  const TracePhase one[] = {{1, 50, 0, 50, 1}};
  const auto out = simulate(generate_trace(50, one, 1), config(Policy::Tpp, 10), kLocal, kRemote, 1);
  const auto csv = epoch_report(out);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,amortized_latency,promo_rate,slow_fraction,est_slowdown,gate");

  const auto trace = small_trace(7);
  const auto two = simulate(trace, config(Policy::FirstTouch, 300), kLocal, kRemote, 1);
  EXPECT_LT(two.amortized_latency_series[0], two.amortized_latency_series[12]);
}

TEST(Tiersim, TraceIoRoundTrip) {
  const auto trace = small_trace(8);
  EXPECT_EQ(parse_trace(trace_header_to_json(trace), trace_body_to_csv(trace)), trace);
}

TEST(Tiersim, TraceErrors) {
  TierTrace empty;
  empty.page_count = 4;
  EXPECT_ERRC(empty.validate(), Errc::EmptyTrace);
  EXPECT_ERRC(parse_trace(R"({"page_count": 4, "wss_pages": 4, "epoch_count": 1})", "epoch,page_id,group_size\n0,9,1\n"),
              Errc::MalformedRecord);
  EXPECT_ERRC(parse_trace(R"({"page_count": 4, "wss_pages": 4, "epoch_count": 1})", "epoch,page_id,group_size\n0,1,0\n"),
              Errc::MalformedRecord);
  EXPECT_ERRC(parse_trace(R"({"wss_pages": 4, "epoch_count": 1})", "epoch,page_id,group_size\n0,1,1\n"),
              Errc::MissingColumn);
}

TEST(Tiersim, PolicyConfigValidation) {
  EXPECT_ERRC(config(Policy::Tpp, 0).validate(), Errc::CapacityUnderflow);
  auto c = config(Policy::Alto, 10);
  c.alto_lower = 100;
  c.alto_upper = 40;
  EXPECT_ERRC(c.validate(), Errc::InvalidParams);
  c = config(Policy::Alto, 10);
  c.alto_steps = 0;
  EXPECT_ERRC(c.validate(), Errc::InvalidParams);
  EXPECT_ERRC(simulate(small_trace(1), config(Policy::Tpp, 0), kLocal, kRemote, 1), Errc::CapacityUnderflow);
}

TEST(Tiersim, PolicyJson) {
  auto c = config(Policy::Alto, 123, 77);
  c.name = "alto-fast";
  const auto back = policy_from_json(policy_to_json(c));
  EXPECT_EQ(back.policy, Policy::Alto);
  EXPECT_EQ(back.fast_capacity, 123u);
  EXPECT_EQ(back.max_promo_rate, 77u);
  EXPECT_EQ(back.label(), "alto-fast");
  EXPECT_EQ(policies_from_json("[" + policy_to_json(c) + "," + policy_to_json(c) + "]").size(), 2u);
  EXPECT_ERRC(policy_from_json(R"({"policy": "lru", "fast_capacity": 1})"), Errc::MalformedRecord);
}

}  // namespace
}  // namespace suplab
