#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace calf {

// Quartiles by linear interpolation at (n-1)p; whiskers per the box-plot
// convention Q1 - 1.5 IQR, Q3 + 1.5 IQR.
struct Stats {
  long n = 0;
  double mean = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double whisker_lo = 0.0;
  double whisker_hi = 0.0;
};

inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile: empty sample");
  if (sorted.size() == 1) return sorted[0];
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline Stats compute_stats(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("compute_stats: empty sample");
  std::sort(values.begin(), values.end());
  Stats s;
  s.n = static_cast<long>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  s.q1 = quantile_sorted(values, 0.25);
  s.median = quantile_sorted(values, 0.5);
  s.q3 = quantile_sorted(values, 0.75);
  const double iqr = s.q3 - s.q1;
  s.whisker_lo = s.q1 - 1.5 * iqr;
  s.whisker_hi = s.q3 + 1.5 * iqr;
  return s;
}

}  // namespace calf
