#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "wpt/errors.hpp"

namespace wpt {

/// Formats a value with 9 significant digits. All CSV output goes through
/// this so identical inputs produce byte-identical files.
inline std::string format_sig9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

/// A CSV file read into memory: a header row of column names and numeric
/// data rows. Lines starting with '#' are skipped.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    throw InputError("CSV has no column '" + name + "'");
  }

  std::vector<double> column(const std::string& name) const {
    const std::size_t j = column_index(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[j]);
    return out;
  }
};

inline CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  bool have_header = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (!have_header) {
      table.columns = cells;
      have_header = true;
      continue;
    }
    if (cells.size() != table.columns.size())
      throw InputError("CSV line " + std::to_string(lineno) + ": expected " +
                       std::to_string(table.columns.size()) + " cells, got " +
                       std::to_string(cells.size()));
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) {
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (end == c.c_str() || *end != '\0')
        throw InputError("CSV line " + std::to_string(lineno) + ": invalid number '" + c + "'");
      row.push_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  if (!have_header) throw InputError("CSV has no header row");
  return table;
}

inline CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open CSV file '" + path + "'");
  return read_csv(in);
}

}  // namespace wpt
