#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace drmatch {

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// sample variance, n-1 denominator
inline double variance_of(const std::vector<double>& v) {
  size_t n = v.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(n - 1);
}

inline double sd_of(const std::vector<double>& v) { return std::sqrt(variance_of(v)); }

// type-7 quantile (linear interpolation between order statistics), the
// same convention everywhere: bootstrap CIs, winsorizing bounds, weight
// percentiles, KDE's IQR.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  size_t n = sorted.size();
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  if (n == 1) return sorted[0];
  double h = p * static_cast<double>(n - 1);
  double fl = std::floor(h);
  size_t lo = static_cast<size_t>(fl);
  if (lo >= n - 1) return sorted[n - 1];
  double g = h - fl;
  return sorted[lo] * (1.0 - g) + sorted[lo + 1] * g;
}

inline double quantile_of(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, p);
}

// standard normal CDF via erfc for accuracy deep in the tails
inline double normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

// Canonical number rendering used for every CSV cell and mirrored in the
// JSON writers: 12 significant digits, shortest form %g gives. Keeping one
// formatter is what makes CSV and JSON artifacts agree digit-for-digit.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

// average ranks (1-based), ties share the mean rank
inline std::vector<double> average_ranks(const std::vector<double>& v) {
  size_t n = v.size();
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](size_t a, size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n, 0.0);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    double r = 0.5 * static_cast<double>(i + j) + 1.0;  // mean of ranks i+1..j+1
    for (size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace drmatch
