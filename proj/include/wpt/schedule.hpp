#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "wpt/csv.hpp"
#include "wpt/errors.hpp"
#include "wpt/params.hpp"

namespace wpt {

struct SchedulePoint {
  double t = 0.0;   ///< breakpoint time [s]
  double d1 = 0.0;  ///< inverter pulse density held from t on
  double d2 = 0.0;  ///< rectifier pulse density held from t on
};

/// Piecewise-constant pulse-density schedule. Each breakpoint's densities
/// hold until the next breakpoint; the last pair holds forever. The first
/// breakpoint must sit at t = 0 and times must be strictly increasing.
class ControlSchedule {
 public:
  explicit ControlSchedule(std::vector<SchedulePoint> points) : points_(std::move(points)) {
    if (points_.empty()) throw InputError("schedule has no breakpoints");
    if (points_.front().t != 0.0) throw InputError("schedule must start at t = 0");
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (i > 0 && !(points_[i].t > points_[i - 1].t))
        throw InputError("schedule breakpoint times must be strictly increasing");
      check_density(points_[i].d1, "d1");
      check_density(points_[i].d2, "d2");
    }
  }

  static ControlSchedule constant(double d1, double d2) {
    return ControlSchedule({{0.0, d1, d2}});
  }

  /// Densities in effect at time t (t >= 0).
  std::pair<double, double> densities_at(double t) const {
    auto it = std::upper_bound(points_.begin(), points_.end(), t,
                               [](double v, const SchedulePoint& p) { return v < p.t; });
    if (it != points_.begin()) --it;
    return {it->d1, it->d2};
  }

  const std::vector<SchedulePoint>& points() const { return points_; }

 private:
  std::vector<SchedulePoint> points_;
};

/// Reads a `t_s,d1,d2` schedule CSV. '#' lines are comments.
inline ControlSchedule load_schedule_csv(const std::string& path) {
  const CsvTable csv = read_csv_file(path);
  if (csv.columns != std::vector<std::string>{"t_s", "d1", "d2"})
    throw InputError("schedule CSV '" + path + "' must have header t_s,d1,d2");
  std::vector<SchedulePoint> pts;
  pts.reserve(csv.rows.size());
  for (const auto& r : csv.rows) pts.push_back({r[0], r[1], r[2]});
  return ControlSchedule(std::move(pts));
}

}  // namespace wpt
