#include "kde.hpp"

#include <algorithm>
#include <cmath>

#include "errors.hpp"
#include "stats.hpp"

namespace drmatch {

namespace {

double silverman(const std::vector<double>& v) {
  if (v.size() < 2) return 1e-9;
  std::vector<double> s = v;
  std::sort(s.begin(), s.end());
  double sd = sd_of(v);
  double iqr = quantile_sorted(s, 0.75) - quantile_sorted(s, 0.25);
  double scale = sd;
  if (iqr > 0.0) scale = std::min(sd, iqr / 1.34);
  if (!(scale > 0.0)) return 1e-9;
  return 0.9 * scale * std::pow(static_cast<double>(v.size()), -0.2);
}

void accumulate(const std::vector<double>& values, double h,
                const std::vector<double>& grid, std::vector<double>& out) {
  const double norm =
      1.0 / (static_cast<double>(values.size()) * h * std::sqrt(2.0 * 3.14159265358979323846));
  for (size_t g = 0; g < grid.size(); ++g) {
    double acc = 0.0;
    for (double x : values) {
      double z = (grid[g] - x) / h;
      acc += std::exp(-0.5 * z * z);
    }
    out[g] = acc * norm;
  }
}

}  // namespace

KdeCurve kde_density(const std::vector<double>& treated_values,
                     const std::vector<double>& control_values,
                     int grid_points, std::vector<Warning>* warnings) {
  if (treated_values.empty() || control_values.empty())
    fail(Status::InvalidSpec, "kde needs non-empty arms");
  if (grid_points < 2) fail(Status::InvalidSpec, "kde grid needs >= 2 points");

  KdeCurve curve;
  curve.bandwidth_treated = silverman(treated_values);
  curve.bandwidth_control = silverman(control_values);
  if (warnings && (curve.bandwidth_treated <= 1e-9 || curve.bandwidth_control <= 1e-9))
    warnings->push_back({Status::DegenerateVariance,
                         "no spread in a density arm; curve is a spike"});

  double lo = treated_values[0], hi = treated_values[0];
  for (double x : treated_values) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  for (double x : control_values) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  double pad = 3.0 * std::max(curve.bandwidth_treated, curve.bandwidth_control);
  if (!(pad > 0.0)) pad = 1.0;
  lo -= pad;
  hi += pad;

  curve.grid.resize(grid_points);
  double step = (hi - lo) / static_cast<double>(grid_points - 1);
  for (int g = 0; g < grid_points; ++g)
    curve.grid[g] = lo + step * static_cast<double>(g);

  // a bandwidth narrower than the grid spacing would fall between nodes
  // and render a degenerate arm invisible; widen it to one step so the
  // spike shows up with its mass intact
  curve.bandwidth_treated = std::max(curve.bandwidth_treated, step);
  curve.bandwidth_control = std::max(curve.bandwidth_control, step);

  curve.treated.assign(grid_points, 0.0);
  curve.control.assign(grid_points, 0.0);
  accumulate(treated_values, curve.bandwidth_treated, curve.grid, curve.treated);
  accumulate(control_values, curve.bandwidth_control, curve.grid, curve.control);
  return curve;
}

}  // namespace drmatch
