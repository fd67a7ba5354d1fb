#include "suplab/counters.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fmt/format.h>

#include "suplab/error.hpp"
#include "suplab/io.hpp"

namespace suplab {
namespace {

void require(bool ok, const char* what) {
  if (!ok) throw Error(Errc::InvariantViolation, what);
}

std::uint64_t parse_count(std::string_view cell, std::size_t row, std::string_view field) {
  const auto first = cell.find_first_not_of(" \t");
  if (first != std::string_view::npos && cell[first] == '-') {
    throw Error(Errc::NegativeValue, fmt::format("row {} field {}", row, field));
  }
  auto v = parse_u64(cell);
  if (!v) throw Error(Errc::MalformedRecord, fmt::format("row {} field {}: '{}'", row, field, cell));
  return *v;
}

std::uint64_t json_count(const nlohmann::json& value, std::size_t row, std::string_view field) {
  if (value.is_number_unsigned()) return value.get<std::uint64_t>();
  if (value.is_number_integer()) {
    if (value.get<std::int64_t>() < 0) throw Error(Errc::NegativeValue, fmt::format("row {} field {}", row, field));
    return static_cast<std::uint64_t>(value.get<std::int64_t>());
  }
  if (value.is_number_float()) {
    const double d = value.get<double>();
    if (d < 0) throw Error(Errc::NegativeValue, fmt::format("row {} field {}", row, field));
    if (std::floor(d) == d && d < 1.8e19) return static_cast<std::uint64_t>(d);
  }
  throw Error(Errc::MalformedRecord, fmt::format("row {} field {}", row, field));
}

}  // namespace

void CounterSnapshot::validate() const {
  require(stall_cycles_total <= total_cycles, "stall_cycles_total <= total_cycles");
  require(backend_stall_cycles <= stall_cycles_total, "backend_stall_cycles <= stall_cycles_total");
  require(llc_miss_demand_stall_cycles <= mem_stall_cycles,
          "llc_miss_demand_stall_cycles (P4) <= mem_stall_cycles (P3)");
  require(mem_stall_cycles <= backend_stall_cycles, "mem_stall_cycles (P3) <= backend_stall_cycles");
  require(offcore_demand_requests == 0 || offcore_demand_occupancy >= offcore_demand_requests,
          "offcore_demand_occupancy >= offcore_demand_requests");
  // Component stalls are exclusive and must fit inside the backend total.
  const long double components = static_cast<long double>(store_buffer_full_stall_cycles) + stall_l1 + stall_l2 +
                                 stall_l3 + llc_miss_demand_stall_cycles;
  require(components <= static_cast<long double>(backend_stall_cycles),
          "store + L1 + L2 + L3 + DRAM stalls <= backend_stall_cycles");
}

std::uint64_t& counter_field(CounterSnapshot& s, std::size_t index) {
  switch (index) {
    case 0: return s.total_cycles;
    case 1: return s.stall_cycles_total;
    case 2: return s.backend_stall_cycles;
    case 3: return s.mem_stall_cycles;
    case 4: return s.llc_miss_demand_stall_cycles;
    case 5: return s.l1_demand_hits;
    case 6: return s.lfb_hits;
    case 7: return s.store_buffer_full_stall_cycles;
    case 8: return s.stall_l1;
    case 9: return s.stall_l2;
    case 10: return s.stall_l3;
    case 11: return s.offcore_demand_requests;
    case 12: return s.offcore_demand_occupancy;
    case 13: return s.l1_prefetch_l3_miss;
    case 14: return s.l1_prefetch_total;
    case 15: return s.l2_prefetch_l3_miss;
    case 16: return s.l2_prefetch_l3_hit;
    case 17: return s.instructions;
    default: throw std::out_of_range("counter field index");
  }
}

std::uint64_t counter_field(const CounterSnapshot& s, std::size_t index) {
  return counter_field(const_cast<CounterSnapshot&>(s), index);
}

void RunPair::validate() const {
  local.validate();
  remote.validate();
  if (local_runtime && !(*local_runtime > 0)) throw Error(Errc::InvariantViolation, label + ": local_runtime > 0");
  if (remote_runtime && !(*remote_runtime > 0)) throw Error(Errc::InvariantViolation, label + ": remote_runtime > 0");
  const double a = static_cast<double>(local.instructions);
  const double b = static_cast<double>(remote.instructions);
  if (std::abs(a - b) > 0.01 * std::max(a, b)) {
    throw Error(Errc::InvariantViolation, label + ": instruction counts differ by more than 1%");
  }
}

std::optional<LogFormat> parse_log_format(std::string_view name) {
  if (iequals(name, "csv")) return LogFormat::Csv;
  if (iequals(name, "json")) return LogFormat::Json;
  return std::nullopt;
}

std::vector<CounterSnapshot> parse_counter_csv(std::string_view text) {
  const auto table = parse_csv(text);
  std::array<std::size_t, kCounterFieldCount> cols{};
  for (std::size_t f = 0; f < kCounterFieldCount; ++f) {
    auto c = table.column(kCounterFields[f]);
    if (!c) throw Error(Errc::MissingColumn, std::string(kCounterFields[f]));
    cols[f] = *c;
  }
  std::vector<CounterSnapshot> out;
  out.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != table.header.size()) {
      throw Error(Errc::MalformedRecord, fmt::format("row {}: {} cells, header has {}", r + 1, row.size(),
                                                     table.header.size()));
    }
    CounterSnapshot s;
    for (std::size_t f = 0; f < kCounterFieldCount; ++f) {
      counter_field(s, f) = parse_count(row[cols[f]], r + 1, kCounterFields[f]);
    }
    try {
      s.validate();
    } catch (const Error& e) {
      throw Error(Errc::InvariantViolation, fmt::format("row {}: {}", r + 1, e.what()));
    }
    out.push_back(s);
  }
  return out;
}

std::vector<CounterSnapshot> parse_counter_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedRecord, std::string("json: ") + e.what());
  }
  if (!doc.is_array()) throw Error(Errc::MalformedRecord, "json: top level must be an array");
  std::vector<CounterSnapshot> out;
  for (std::size_t r = 0; r < doc.size(); ++r) {
    const auto& obj = doc[r];
    if (!obj.is_object()) throw Error(Errc::MalformedRecord, fmt::format("row {}: not an object", r + 1));
    CounterSnapshot s;
    for (std::size_t f = 0; f < kCounterFieldCount; ++f) {
      const nlohmann::json* value = nullptr;
      for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (iequals(it.key(), kCounterFields[f])) {
          value = &it.value();
          break;
        }
      }
      if (!value) throw Error(Errc::MissingColumn, std::string(kCounterFields[f]));
      counter_field(s, f) = json_count(*value, r + 1, kCounterFields[f]);
    }
    try {
      s.validate();
    } catch (const Error& e) {
      throw Error(Errc::InvariantViolation, fmt::format("row {}: {}", r + 1, e.what()));
    }
    out.push_back(s);
  }
  return out;
}

std::vector<CounterSnapshot> ingest_counter_log(const std::filesystem::path& path, LogFormat format) {
  const auto text = read_text(path);
  return format == LogFormat::Csv ? parse_counter_csv(text) : parse_counter_json(text);
}

std::string counters_to_csv(std::span<const CounterSnapshot> snapshots) {
  std::vector<std::string> cells(kCounterFields.begin(), kCounterFields.end());
  std::string out = join_csv_row(cells);
  for (const auto& s : snapshots) {
    for (std::size_t f = 0; f < kCounterFieldCount; ++f) cells[f] = fmt_num(counter_field(s, f));
    out += join_csv_row(cells);
  }
  return out;
}

std::string counters_to_json(std::span<const CounterSnapshot> snapshots) {
  auto doc = nlohmann::ordered_json::array();
  for (const auto& s : snapshots) {
    nlohmann::ordered_json obj;
    for (std::size_t f = 0; f < kCounterFieldCount; ++f) obj[std::string(kCounterFields[f])] = counter_field(s, f);
    doc.push_back(obj);
  }
  return doc.dump(2) + "\n";
}

std::vector<std::string> runpair_csv_header() {
  std::vector<std::string> h{"label", "local_runtime", "remote_runtime"};
  for (auto f : kCounterFields) h.push_back("local_" + std::string(f));
  for (auto f : kCounterFields) h.push_back("remote_" + std::string(f));
  return h;
}

std::vector<std::string> runpair_csv_cells(const RunPair& pair) {
  std::vector<std::string> row{pair.label, pair.local_runtime ? fmt_num(*pair.local_runtime) : "",
                               pair.remote_runtime ? fmt_num(*pair.remote_runtime) : ""};
  for (std::size_t f = 0; f < kCounterFieldCount; ++f) row.push_back(fmt_num(counter_field(pair.local, f)));
  for (std::size_t f = 0; f < kCounterFieldCount; ++f) row.push_back(fmt_num(counter_field(pair.remote, f)));
  return row;
}

RunPair runpair_from_row(const std::vector<std::string>& header, const std::vector<std::string>& row,
                         std::size_t row_number) {
  CsvTable view{header, {}};
  if (row.size() != header.size()) {
    throw Error(Errc::MalformedRecord, fmt::format("row {}: {} cells, header has {}", row_number, row.size(),
                                                   header.size()));
  }
  RunPair pair;
  if (auto c = view.column("label")) pair.label = row[*c];
  else pair.label = fmt::format("row{}", row_number);

  auto runtime = [&](std::string_view name) -> std::optional<double> {
    auto c = view.column(name);
    if (!c || row[*c].empty()) return std::nullopt;
    auto v = parse_double(row[*c]);
    if (!v) throw Error(Errc::MalformedRecord, fmt::format("row {} field {}", row_number, name));
    return v;
  };
  pair.local_runtime = runtime("local_runtime");
  pair.remote_runtime = runtime("remote_runtime");

  for (int side = 0; side < 2; ++side) {
    auto& snap = side == 0 ? pair.local : pair.remote;
    const std::string prefix = side == 0 ? "local_" : "remote_";
    for (std::size_t f = 0; f < kCounterFieldCount; ++f) {
      const auto name = prefix + std::string(kCounterFields[f]);
      auto c = view.column(name);
      if (!c) throw Error(Errc::MissingColumn, name);
      counter_field(snap, f) = parse_count(row[*c], row_number, name);
    }
  }
  try {
    pair.validate();
  } catch (const Error& e) {
    throw Error(e.code(), fmt::format("row {}: {}", row_number, e.what()));
  }
  return pair;
}

std::vector<RunPair> parse_runpair_csv(std::string_view text) {
  const auto table = parse_csv(text);
  std::vector<RunPair> out;
  out.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) out.push_back(runpair_from_row(table.header, table.rows[r], r + 1));
  return out;
}

std::string runpairs_to_csv(std::span<const RunPair> pairs) {
  std::string out = join_csv_row(runpair_csv_header());
  for (const auto& p : pairs) out += join_csv_row(runpair_csv_cells(p));
  return out;
}

double amortized_offcore_latency(const CounterSnapshot& s) {
  if (s.offcore_demand_requests == 0) throw Error(Errc::NoDemandReads, "offcore_demand_requests == 0");
  return static_cast<double>(s.offcore_demand_occupancy) / static_cast<double>(s.offcore_demand_requests);
}

double source_value(const SourceVector& v, std::size_t index) {
  switch (index) {
    case 0: return v.store;
    case 1: return v.l1;
    case 2: return v.l2;
    case 3: return v.l3;
    case 4: return v.dram;
    default: throw std::out_of_range("source index");
  }
}

SourceVector stall_fractions(const CounterSnapshot& s) {
  if (s.total_cycles == 0) throw Error(Errc::DivisionByZero, "total_cycles == 0");
  const double c = static_cast<double>(s.total_cycles);
  return SourceVector{
      .store = static_cast<double>(s.store_buffer_full_stall_cycles) / c,
      .l1 = static_cast<double>(s.stall_l1) / c,
      .l2 = static_cast<double>(s.stall_l2) / c,
      .l3 = static_cast<double>(s.stall_l3) / c,
      .dram = static_cast<double>(s.llc_miss_demand_stall_cycles) / c,
  };
}

}  // namespace suplab
