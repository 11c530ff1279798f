#pragma once

#include <charconv>
#include <cstddef>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "fptgrf/errors.hpp"

namespace fptgrf::csv {

// A parsed CSV file: optional header plus rows of raw cells.
struct Table {
  std::vector<std::string> header;  // empty when the file has no header row
  std::vector<std::vector<std::string>> rows;

  std::size_t num_columns() const {
    if (!header.empty()) return header.size();
    return rows.empty() ? 0 : rows.front().size();
  }

  // Column position for a header name, if present.
  std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return j;
    return std::nullopt;
  }
};

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split_line(std::string_view line, char sep = ',') {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    const std::string_view cell =
        line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    std::string_view t = trim(cell);
    if (t.size() >= 2 && t.front() == '"' && t.back() == '"') t = t.substr(1, t.size() - 2);
    cells.emplace_back(t);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return cells;
}

// Strict numeric parse: the whole cell must be a finite-or-not double.
inline std::optional<double> parse_double(std::string_view cell) {
  cell = trim(cell);
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  if (cell.empty()) return std::nullopt;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) return std::nullopt;
  return value;
}

inline Table read(std::istream& in, bool has_header) {
  Table table;
  std::string line;
  bool first = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_line(line);
    if (first && has_header) {
      table.header = std::move(cells);
      first = false;
      continue;
    }
    first = false;
    const std::size_t expected = table.num_columns();
    if (expected != 0 && cells.size() != expected)
      throw DataError("csv line " + std::to_string(line_no) + ": expected " +
                      std::to_string(expected) + " cells, found " + std::to_string(cells.size()));
    table.rows.push_back(std::move(cells));
  }
  return table;
}

inline Table read_file(const std::string& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return read(in, has_header);
}

// Shortest representation that parses back to the same double.
inline std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error("failed to format double");
  return std::string(buf, ptr);
}

inline void write_row(std::ostream& out, const std::vector<std::string>& cells) {
  for (std::size_t j = 0; j < cells.size(); ++j) {
    if (j) out << ',';
    out << cells[j];
  }
  out << '\n';
}

}  // namespace fptgrf::csv
