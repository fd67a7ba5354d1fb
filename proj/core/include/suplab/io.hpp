#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace suplab {

// Minimal CSV: comma separated, no quoting, first non-empty line is the header.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Case-insensitive header lookup.
  std::optional<std::size_t> column(std::string_view name) const;
};

CsvTable parse_csv(std::string_view text);

std::string read_text(const std::filesystem::path& path);

// Writes to a sibling temp file and renames it over `path`.
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

// Shortest decimal form that round-trips to the same double.
std::string fmt_num(double value);
std::string fmt_num(std::uint64_t value);

std::string join_csv_row(const std::vector<std::string>& cells);

bool iequals(std::string_view a, std::string_view b) noexcept;

// Strict decimal parsers; nullopt on any trailing garbage.
std::optional<std::uint64_t> parse_u64(std::string_view text);
std::optional<double> parse_double(std::string_view text);

}  // namespace suplab
