#pragma once

#include <vector>

#include "errors.hpp"

namespace drmatch {

struct KdeCurve {
  std::vector<double> grid;
  std::vector<double> treated;
  std::vector<double> control;
  double bandwidth_treated = 0.0;
  double bandwidth_control = 0.0;
};

// Gaussian kernel density on a shared grid; Silverman's rule
// h = 0.9 min(sd, IQR/1.34) n^(-1/5) per arm. Multiplicity weighting is
// expressed by repeating values in the input. An arm with no spread keeps
// a floor bandwidth (the curve degenerates to a spike) and warns.
KdeCurve kde_density(const std::vector<double>& treated_values,
                     const std::vector<double>& control_values,
                     int grid_points = 200,
                     std::vector<Warning>* warnings = nullptr);

}  // namespace drmatch
