#pragma once

#include <fstream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "wpt/csv.hpp"
#include "wpt/errors.hpp"

namespace wpt {

/// A sampled time response: strictly increasing times plus one row of state
/// (and auxiliary) values per sample. Column names exclude the time column.
class Trajectory {
 public:
  explicit Trajectory(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  void push_row(double t, std::span<const double> values) {
    if (values.size() != columns_.size())
      throw InputError("trajectory row width does not match column count");
    if (!times_.empty() && !(t > times_.back()))
      throw InputError("trajectory times must be strictly increasing");
    times_.push_back(t);
    data_.insert(data_.end(), values.begin(), values.end());
  }

  std::size_t rows() const { return times_.size(); }
  std::size_t width() const { return columns_.size(); }
  double time(std::size_t i) const { return times_[i]; }
  double value(std::size_t i, std::size_t j) const { return data_[i * columns_.size() + j]; }

  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * columns_.size(), columns_.size()};
  }

  const std::vector<std::string>& columns() const { return columns_; }
  const std::vector<double>& times() const { return times_; }

  std::size_t column_index(const std::string& name) const {
    for (std::size_t j = 0; j < columns_.size(); ++j)
      if (columns_[j] == name) return j;
    throw InputError("trajectory has no column '" + name + "'");
  }

  std::vector<double> column(const std::string& name) const {
    const std::size_t j = column_index(name);
    std::vector<double> out;
    out.reserve(rows());
    for (std::size_t i = 0; i < rows(); ++i) out.push_back(value(i, j));
    return out;
  }

  void write_csv(std::ostream& out) const {
    out << "t_s";
    for (const auto& c : columns_) out << ',' << c;
    out << '\n';
    for (std::size_t i = 0; i < rows(); ++i) {
      out << format_sig9(times_[i]);
      for (std::size_t j = 0; j < columns_.size(); ++j) out << ',' << format_sig9(value(i, j));
      out << '\n';
    }
  }

  void write_csv_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open output file '" + path + "'");
    write_csv(out);
  }

 private:
  std::vector<std::string> columns_;
  std::vector<double> times_;
  std::vector<double> data_;  // row-major, rows() x width()
};

}  // namespace wpt
