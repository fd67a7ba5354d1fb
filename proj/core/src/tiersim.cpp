#include "suplab/tiersim.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>

#include "suplab/error.hpp"
#include "suplab/io.hpp"
#include "suplab/parallel.hpp"
#include "suplab/rng.hpp"

namespace suplab {
namespace {

nlohmann::json parse_json(std::string_view text, const char* what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedRecord, fmt::format("{}: {}", what, e.what()));
  }
}

}  // namespace

void TierTrace::validate() const {
  if (epochs.empty() || miss_count() == 0) throw Error(Errc::EmptyTrace, "trace has no demand misses");
  if (page_count == 0) throw Error(Errc::MalformedRecord, "trace page_count must be >= 1");
  if (!(epoch_compute_cycles >= 0)) throw Error(Errc::MalformedRecord, "epoch_compute_cycles must be >= 0");
  for (std::size_t e = 0; e < epochs.size(); ++e) {
    for (const auto& m : epochs[e].misses) {
      if (m.page_id >= page_count) {
        throw Error(Errc::MalformedRecord, fmt::format("epoch {}: page {} >= page_count {}", e, m.page_id, page_count));
      }
      if (m.group_size < 1) throw Error(Errc::MalformedRecord, fmt::format("epoch {}: group_size must be >= 1", e));
    }
  }
}

std::size_t TierTrace::miss_count() const {
  std::size_t n = 0;
  for (const auto& e : epochs) n += e.misses.size();
  return n;
}

TierTrace parse_trace(std::string_view header_json, std::string_view body_csv) {
  const auto h = parse_json(header_json, "trace header");
  if (!h.is_object()) throw Error(Errc::MalformedRecord, "trace header must be an object");
  for (const char* key : {"page_count", "wss_pages"}) {
    if (!h.contains(key) || !h[key].is_number_unsigned()) throw Error(Errc::MissingColumn, key);
  }
  TierTrace t;
  t.page_count = h["page_count"].get<std::uint64_t>();
  t.wss_pages = h["wss_pages"].get<std::uint64_t>();
  t.epoch_compute_cycles = h.value("epoch_compute_cycles", 1e6);

  const auto table = parse_csv(body_csv);
  const auto c_epoch = table.column("epoch");
  const auto c_page = table.column("page_id");
  const auto c_group = table.column("group_size");
  if (!c_epoch) throw Error(Errc::MissingColumn, "epoch");
  if (!c_page) throw Error(Errc::MissingColumn, "page_id");
  if (!c_group) throw Error(Errc::MissingColumn, "group_size");

  std::size_t epoch_count = h.value("epoch_count", std::size_t{0});
  std::vector<std::pair<std::size_t, TraceMiss>> rows;
  rows.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != table.header.size()) throw Error(Errc::MalformedRecord, fmt::format("trace row {}", r + 1));
    const auto epoch = parse_u64(row[*c_epoch]);
    const auto page = parse_u64(row[*c_page]);
    const auto group = parse_u64(row[*c_group]);
    if (!epoch || !page || !group || *group > UINT32_MAX) {
      throw Error(Errc::MalformedRecord, fmt::format("trace row {}: expected non-negative integers", r + 1));
    }
    if (*group == 0) throw Error(Errc::MalformedRecord, fmt::format("trace row {}: group_size must be >= 1", r + 1));
    epoch_count = std::max<std::size_t>(epoch_count, *epoch + 1);
    rows.push_back({*epoch, {*page, static_cast<std::uint32_t>(*group)}});
  }
  t.epochs.resize(epoch_count);
  for (const auto& [e, m] : rows) t.epochs[e].misses.push_back(m);

  auto scalars = [&](const char* key, double TraceEpoch::*field) {
    if (!h.contains(key)) return;
    const auto& arr = h[key];
    if (!arr.is_array() || arr.size() != t.epochs.size()) {
      throw Error(Errc::MalformedRecord, fmt::format("{} must be an array with one value per epoch", key));
    }
    for (std::size_t e = 0; e < arr.size(); ++e) t.epochs[e].*field = arr[e].get<double>();
  };
  scalars("store_intensity", &TraceEpoch::store_intensity);
  scalars("prefetch_intensity", &TraceEpoch::prefetch_intensity);
  t.validate();
  return t;
}

std::string trace_header_to_json(const TierTrace& trace) {
  nlohmann::ordered_json j;
  j["page_count"] = trace.page_count;
  j["wss_pages"] = trace.wss_pages;
  j["epoch_count"] = trace.epochs.size();
  j["epoch_compute_cycles"] = trace.epoch_compute_cycles;
  const bool any_scalars = std::any_of(trace.epochs.begin(), trace.epochs.end(), [](const TraceEpoch& e) {
    return e.store_intensity != 0 || e.prefetch_intensity != 0;
  });
  if (any_scalars) {
    auto& s = j["store_intensity"] = nlohmann::ordered_json::array();
    auto& p = j["prefetch_intensity"] = nlohmann::ordered_json::array();
    for (const auto& e : trace.epochs) {
      s.push_back(e.store_intensity);
      p.push_back(e.prefetch_intensity);
    }
  }
  return j.dump(2) + "\n";
}

std::string trace_body_to_csv(const TierTrace& trace) {
  std::string out = "epoch,page_id,group_size\n";
  for (std::size_t e = 0; e < trace.epochs.size(); ++e) {
    for (const auto& m : trace.epochs[e].misses) out += fmt::format("{},{},{}\n", e, m.page_id, m.group_size);
  }
  return out;
}

std::string_view to_string(Policy p) noexcept {
  switch (p) {
    case Policy::FirstTouch: return "first_touch";
    case Policy::Tpp: return "tpp";
    case Policy::Alto: return "alto";
  }
  return "tpp";
}

std::optional<Policy> parse_policy(std::string_view name) {
  for (auto p : {Policy::FirstTouch, Policy::Tpp, Policy::Alto}) {
    if (iequals(name, to_string(p))) return p;
  }
  return std::nullopt;
}

void PolicyConfig::validate() const {
  if (fast_capacity < 1) throw Error(Errc::CapacityUnderflow, "fast_capacity must be >= 1");
  if (!(alto_lower < alto_upper)) throw Error(Errc::InvalidParams, "alto_lower must be < alto_upper");
  if (alto_steps < 1) throw Error(Errc::InvalidParams, "alto_steps must be >= 1");
  if (admit_window < 1) throw Error(Errc::InvalidParams, "admit_window must be >= 1");
  if (promo_threshold_accesses < 1) throw Error(Errc::InvalidParams, "promo_threshold_accesses must be >= 1");
  if (!(migration_cost_us >= 0)) throw Error(Errc::InvalidParams, "migration_cost_us must be >= 0");
}

std::string PolicyConfig::label() const { return name.empty() ? std::string(to_string(policy)) : name; }

std::string policy_to_json(const PolicyConfig& cfg) {
  nlohmann::ordered_json j;
  j["policy"] = to_string(cfg.policy);
  j["name"] = cfg.label();
  j["promo_threshold_accesses"] = cfg.promo_threshold_accesses;
  j["max_promo_rate"] = cfg.max_promo_rate;
  j["alto_lower"] = cfg.alto_lower;
  j["alto_upper"] = cfg.alto_upper;
  j["alto_steps"] = cfg.alto_steps;
  j["admit_window"] = cfg.admit_window;
  j["migration_cost_us"] = cfg.migration_cost_us;
  j["fast_capacity"] = cfg.fast_capacity;
  return j.dump(2) + "\n";
}

namespace {

PolicyConfig policy_from_object(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(Errc::MalformedRecord, "policy config must be an object");
  if (!j.contains("policy")) throw Error(Errc::MissingColumn, "policy");
  PolicyConfig cfg;
  const auto name = j["policy"].get<std::string>();
  const auto p = parse_policy(name);
  if (!p) throw Error(Errc::MalformedRecord, "unknown policy '" + name + "'");
  cfg.policy = *p;
  if (!j.contains("fast_capacity")) throw Error(Errc::MissingColumn, "fast_capacity");
  try {
    cfg.name = j.value("name", std::string{});
    cfg.promo_threshold_accesses = j.value("promo_threshold_accesses", cfg.promo_threshold_accesses);
    cfg.max_promo_rate = j.value("max_promo_rate", cfg.max_promo_rate);
    cfg.alto_lower = j.value("alto_lower", cfg.alto_lower);
    cfg.alto_upper = j.value("alto_upper", cfg.alto_upper);
    cfg.alto_steps = j.value("alto_steps", cfg.alto_steps);
    cfg.admit_window = j.value("admit_window", cfg.admit_window);
    cfg.migration_cost_us = j.value("migration_cost_us", cfg.migration_cost_us);
    cfg.fast_capacity = j["fast_capacity"].get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedRecord, std::string("policy config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

}  // namespace

PolicyConfig policy_from_json(std::string_view text) { return policy_from_object(parse_json(text, "policy config")); }

std::vector<PolicyConfig> policies_from_json(std::string_view text) {
  const auto j = parse_json(text, "policy config");
  std::vector<PolicyConfig> out;
  if (j.is_array()) {
    for (const auto& item : j) out.push_back(policy_from_object(item));
  } else {
    out.push_back(policy_from_object(j));
  }
  if (out.empty()) throw Error(Errc::EmptyInput, "no policy configs");
  return out;
}

std::uint32_t alto_gate_level(double amortized_latency, double lower, double upper, std::uint32_t steps) {
  if (amortized_latency >= upper) return steps;
  if (amortized_latency < lower || steps == 1) return 0;
  // Jumps at lower + j * (upper - lower) / (steps - 1), j = 0 .. steps - 1.
  const double width = (upper - lower) / static_cast<double>(steps - 1);
  std::uint32_t level = 0;
  for (std::uint32_t j = 0; j < steps; ++j) {
    if (lower + static_cast<double>(j) * width <= amortized_latency) level = j + 1;
  }
  return std::min(level, steps);
}

double alto_gate(double amortized_latency, double lower, double upper, std::uint32_t steps) {
  return static_cast<double>(alto_gate_level(amortized_latency, lower, upper, steps)) / static_cast<double>(steps);
}

PolicyOutcome simulate(const TierTrace& trace, const PolicyConfig& cfg, const DeviceProfile& local,
                       const DeviceProfile& remote, std::uint64_t seed, const SimConfig& sim) {
  trace.validate();
  cfg.validate();
  local.validate();
  remote.validate();

  const std::size_t n = trace.page_count;
  std::vector<char> fast(n, 0);
  std::vector<std::uint32_t> count(n, 0);
  std::vector<char> queued(n, 0);
  std::vector<std::uint64_t> stamp(n, 0);
  std::set<std::pair<std::uint64_t, std::uint64_t>> lru;  // (stamp, page) of fast pages
  std::deque<std::uint64_t> candidates;
  std::uint64_t clock = 0;
  std::uint64_t resident = 0;

  // First touch: pages land in the fast tier in order of first access until it fills.
  for (const auto& e : trace.epochs) {
    for (const auto& m : e.misses) {
      if (resident == cfg.fast_capacity) break;
      if (!fast[m.page_id]) {
        fast[m.page_id] = 1;
        ++resident;
        lru.insert({0, m.page_id});
      }
    }
  }

  PolicyOutcome out;
  out.label = cfg.label();
  out.max_fast_resident = resident;
  const double hz = sim.clock_ghz * 1e9;
  const double local_cycles_mean = local.unloaded_latency() * sim.clock_ghz;
  const double migration_s = cfg.migration_cost_us * 1e-6;
  const bool migrates = cfg.policy != Policy::FirstTouch;
  const std::uint32_t window = cfg.admit_window;
  std::uint64_t admit_counter = 0;
  Rng rng(seed);
  double runtime = 0;

  for (const auto& epoch : trace.epochs) {
    double stall = 0;
    double baseline = 0;
    std::size_t slow_hits = 0;
    for (const auto& m : epoch.misses) {
      const auto draw = LatencyDraw::next(rng);
      const bool is_fast = fast[m.page_id] != 0;
      const auto& dev = is_fast ? local : remote;
      const double lat = apply_draw(dev, dev.unloaded_latency(), draw) * sim.clock_ghz;
      stall += lat / m.group_size;
      baseline += local_cycles_mean / m.group_size;
      ++clock;
      if (is_fast) {
        lru.erase({stamp[m.page_id], m.page_id});
        stamp[m.page_id] = clock;
        lru.insert({clock, m.page_id});
      } else {
        ++slow_hits;
        if (migrates && ++count[m.page_id] >= cfg.promo_threshold_accesses && !queued[m.page_id]) {
          queued[m.page_id] = 1;
          candidates.push_back(m.page_id);
        }
      }
    }
    const std::size_t misses = epoch.misses.size();
    const double amortized = misses ? stall / static_cast<double>(misses) : 0.0;

    std::uint32_t level = cfg.alto_steps;
    if (cfg.policy == Policy::Alto) level = alto_gate_level(amortized, cfg.alto_lower, cfg.alto_upper, cfg.alto_steps);
    const std::uint64_t admit_per_window = (static_cast<std::uint64_t>(level) * window + cfg.alto_steps - 1) / cfg.alto_steps;

    std::uint64_t promoted = 0;
    std::uint64_t examined = 0;
    while (migrates && examined < cfg.max_promo_rate && !candidates.empty()) {
      const auto page = candidates.front();
      candidates.pop_front();
      queued[page] = 0;
      ++examined;
      const bool admit = cfg.policy != Policy::Alto || (admit_counter++ % window) < admit_per_window;
      if (!admit) {
        count[page] = 0;
        continue;
      }
      if (resident == cfg.fast_capacity) {
        const auto victim = lru.begin()->second;
        lru.erase(lru.begin());
        fast[victim] = 0;
        count[victim] = 0;
        --resident;
        ++out.demotions;
      }
      fast[page] = 1;
      count[page] = 0;
      stamp[page] = clock;
      lru.insert({clock, page});
      ++resident;
      ++promoted;
    }
    // Candidates are recent accesses only; leftovers keep their counts and
    // requalify on their next access.
    for (const auto page : candidates) queued[page] = 0;
    candidates.clear();
    out.promotions += promoted;
    out.max_fast_resident = std::max(out.max_fast_resident, resident);

    const double epoch_s = (trace.epoch_compute_cycles + stall) / hz + static_cast<double>(promoted) * migration_s;
    const double baseline_s = (trace.epoch_compute_cycles + baseline) / hz;
    runtime += epoch_s;
    out.promo_rate_series.push_back(promoted);
    out.amortized_latency_series.push_back(amortized);
    out.slow_tier_access_fraction_series.push_back(misses ? static_cast<double>(slow_hits) / static_cast<double>(misses) : 0.0);
    out.gate_series.push_back(static_cast<double>(level) / static_cast<double>(cfg.alto_steps));
    out.est_slowdown_series.push_back(baseline_s > 0 ? epoch_s / baseline_s - 1.0 : 0.0);
  }
  out.simulated_runtime = runtime;
  if (!(runtime > 0)) throw Error(Errc::EmptyTrace, "trace produced zero runtime");
  return out;
}

std::vector<PolicyComparison> compare_policies(const TierTrace& trace, std::span<const PolicyConfig> cfgs,
                                               const DeviceProfile& local, const DeviceProfile& remote,
                                               std::uint64_t seed, const SimConfig& sim,
                                               std::vector<PolicyOutcome>* outcomes) {
  if (cfgs.empty()) throw Error(Errc::EmptyInput, "compare_policies needs at least one config");
  PolicyConfig base;
  base.policy = Policy::FirstTouch;
  base.name = "all_fast";
  base.fast_capacity = trace.page_count;

  std::vector<PolicyOutcome> runs(cfgs.size() + 1);
  parallel_for(runs.size(), [&](std::size_t i) {
    runs[i] = simulate(trace, i == 0 ? base : cfgs[i - 1], local, remote, seed, sim);
  });

  std::vector<PolicyComparison> rows;
  const double t0 = runs[0].simulated_runtime;
  for (const auto& r : runs) rows.push_back({r.label, r.simulated_runtime, r.simulated_runtime / t0, r.promotions, r.demotions});
  if (outcomes) *outcomes = std::move(runs);
  return rows;
}

std::string epoch_report(const PolicyOutcome& o) {
  std::string out = join_csv_row({"epoch", "amortized_latency", "promo_rate", "slow_fraction", "est_slowdown", "gate"});
  for (std::size_t e = 0; e < o.promo_rate_series.size(); ++e) {
    out += join_csv_row({fmt_num(static_cast<std::uint64_t>(e)), fmt_num(o.amortized_latency_series[e]),
                         fmt_num(o.promo_rate_series[e]), fmt_num(o.slow_tier_access_fraction_series[e]),
                         fmt_num(o.est_slowdown_series[e]), fmt_num(o.gate_series[e])});
  }
  return out;
}

std::string comparison_to_csv(std::span<const PolicyComparison> rows) {
  std::string out = join_csv_row({"label", "runtime", "normalized", "promotions", "demotions"});
  for (const auto& r : rows) {
    out += join_csv_row({r.label, fmt_num(r.runtime), fmt_num(r.normalized), fmt_num(r.promotions), fmt_num(r.demotions)});
  }
  return out;
}

TierTrace generate_trace(std::uint64_t page_count, std::span<const TracePhase> phases, std::uint64_t seed,
                         double epoch_compute_cycles) {
  TierTrace t;
  t.page_count = page_count;
  t.epoch_compute_cycles = epoch_compute_cycles;
  std::vector<char> touched(page_count, 0);
  Rng rng(seed);
  for (const auto& ph : phases) {
    if (ph.page_span == 0 || ph.page_begin + ph.page_span > page_count || ph.group_size < 1) {
      throw Error(Errc::InvalidParams, "trace phase outside the page range");
    }
    for (std::size_t e = 0; e < ph.epochs; ++e) {
      TraceEpoch epoch;
      epoch.misses.reserve(ph.misses_per_epoch);
      for (std::size_t i = 0; i < ph.misses_per_epoch; ++i) {
        const auto page = ph.page_begin + std::min(ph.page_span - 1, static_cast<std::uint64_t>(rng.uniform() * static_cast<double>(ph.page_span)));
        touched[page] = 1;
        epoch.misses.push_back({page, ph.group_size});
      }
      t.epochs.push_back(std::move(epoch));
    }
  }
  t.wss_pages = static_cast<std::uint64_t>(std::count(touched.begin(), touched.end(), 1));
  return t;
}

TraceFixture twitter_like_fixture(std::uint64_t seed) {
  const TracePhase phases[] = {
      {40, 4000, 0, 60000, 16},
      {20, 4000, 60000, 2000, 1},
  };
  return {"tc-twitter-like", generate_trace(62000, phases, derive_seed(seed, 1)), 8000, 256};
}

TraceFixture gpt2_like_fixture(std::uint64_t seed) {
  const TracePhase phases[] = {{60, 6000, 0, 50000, 24}};
  return {"gpt2-like", generate_trace(50000, phases, derive_seed(seed, 2)), 5000, 512};
}

TraceFixture kron_like_fixture(std::uint64_t seed) {
  const TracePhase phases[] = {{60, 3000, 0, 12000, 1}};
  return {"tc-kron-like", generate_trace(12000, phases, derive_seed(seed, 3)), 4000, 128};
}

std::vector<TraceFixture> trace_fixtures(std::uint64_t seed) {
  return {twitter_like_fixture(seed), gpt2_like_fixture(seed), kron_like_fixture(seed)};
}

std::vector<PolicyConfig> fixture_policies(const TraceFixture& fixture) {
  std::vector<PolicyConfig> out;
  for (auto p : {Policy::FirstTouch, Policy::Tpp, Policy::Alto}) {
    PolicyConfig cfg;
    cfg.policy = p;
    cfg.fast_capacity = fixture.fast_capacity;
    cfg.max_promo_rate = fixture.max_promo_rate;
    out.push_back(cfg);
  }
  return out;
}

}  // namespace suplab
