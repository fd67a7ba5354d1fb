#include "suplab/breakdown.hpp"

#include <algorithm>
#include <cmath>

#include "suplab/error.hpp"
#include "suplab/io.hpp"

namespace suplab {
namespace {

double delta(std::uint64_t remote, std::uint64_t local) {
  return static_cast<double>(remote) - static_cast<double>(local);
}

}  // namespace

double measure_slowdown(const RunPair& pair) {
  if (pair.local_runtime && pair.remote_runtime) {
    if (!(*pair.local_runtime > 0)) throw Error(Errc::DivisionByZero, pair.label + ": local_runtime");
    return (*pair.remote_runtime - *pair.local_runtime) / *pair.local_runtime;
  }
  if (pair.local.total_cycles == 0) throw Error(Errc::DivisionByZero, pair.label + ": local total_cycles");
  return delta(pair.remote.total_cycles, pair.local.total_cycles) / static_cast<double>(pair.local.total_cycles);
}

SlowdownReport decompose(const RunPair& pair) {
  const auto& l = pair.local;
  const auto& r = pair.remote;
  if (l.total_cycles == 0) throw Error(Errc::DivisionByZero, pair.label + ": local total_cycles");
  const double c = static_cast<double>(l.total_cycles);

  SlowdownReport rep;
  rep.label = pair.label;
  rep.total_measured = measure_slowdown(pair);
  rep.total_stall_estimate = delta(r.stall_cycles_total, l.stall_cycles_total) / c;
  rep.total_backend_estimate = delta(r.backend_stall_cycles, l.backend_stall_cycles) / c;
  rep.components = SourceVector{
      .store = delta(r.store_buffer_full_stall_cycles, l.store_buffer_full_stall_cycles) / c,
      .l1 = delta(r.stall_l1, l.stall_l1) / c,
      .l2 = delta(r.stall_l2, l.stall_l2) / c,
      .l3 = delta(r.stall_l3, l.stall_l3) / c,
      .dram = delta(r.llc_miss_demand_stall_cycles, l.llc_miss_demand_stall_cycles) / c,
  };
  rep.residual = rep.total_backend_estimate - rep.components.sum();
  return rep;
}

AccuracyCdf::AccuracyCdf(std::vector<double> sorted_differences) : diffs_(std::move(sorted_differences)) {
  if (diffs_.empty()) throw Error(Errc::EmptyInput, "accuracy cdf needs at least one difference");
  std::sort(diffs_.begin(), diffs_.end());
}

double AccuracyCdf::quantile(double q) const {
  const auto n = diffs_.size();
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return diffs_[rank - 1];
}

double AccuracyCdf::fraction_within(double tolerance) const {
  const auto it = std::upper_bound(diffs_.begin(), diffs_.end(), tolerance);
  return static_cast<double>(it - diffs_.begin()) / static_cast<double>(diffs_.size());
}

AccuracyCdf estimate_accuracy(std::span<const RunPair> pairs, EstimateKind which) {
  if (pairs.empty()) throw Error(Errc::EmptyInput, "estimate_accuracy needs at least one pair");
  std::vector<double> diffs;
  diffs.reserve(pairs.size());
  for (const auto& p : pairs) {
    const auto rep = decompose(p);
    const double est = which == EstimateKind::Stall ? rep.total_stall_estimate : rep.total_backend_estimate;
    diffs.push_back(std::abs(est - rep.total_measured));
  }
  return AccuracyCdf(std::move(diffs));
}

std::string reports_to_csv(std::span<const SlowdownReport> reports) {
  std::string out = join_csv_row(
      {"label", "measured", "stall_estimate", "backend_estimate", "store", "L1", "L2", "L3", "DRAM", "residual"});
  for (const auto& r : reports) {
    out += join_csv_row({r.label, fmt_num(r.total_measured), fmt_num(r.total_stall_estimate),
                         fmt_num(r.total_backend_estimate), fmt_num(r.components.store), fmt_num(r.components.l1),
                         fmt_num(r.components.l2), fmt_num(r.components.l3), fmt_num(r.components.dram),
                         fmt_num(r.residual)});
  }
  return out;
}

std::string reports_to_long_csv(std::span<const SlowdownReport> reports) {
  std::string out = join_csv_row({"label", "source", "slowdown"});
  for (const auto& r : reports) {
    for (std::size_t i = 0; i < kSourceNames.size(); ++i) {
      out += join_csv_row({r.label, std::string(kSourceNames[i]), fmt_num(source_value(r.components, i))});
    }
    out += join_csv_row({r.label, "Other", fmt_num(r.residual)});
  }
  return out;
}

}  // namespace suplab
