#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace pwexp::stats {

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7). +inf values sort last; an interpolation touching
/// one yields +inf.
inline double quantile(std::vector<double> x, double p) {
  if (x.empty()) throw std::invalid_argument("quantile of empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("quantile level outside [0, 1]");
  std::sort(x.begin(), x.end());
  const double h = static_cast<double>(x.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, x.size() - 1);
  const double frac = h - static_cast<double>(lo);
  if (frac == 0.0) return x[lo];
  if (std::isinf(x[hi]) || std::isinf(x[lo])) return std::numeric_limits<double>::infinity();
  return x[lo] + frac * (x[hi] - x[lo]);
}

/// Mean computed as offsets from the first element, so a constant sample
/// returns that constant exactly.
inline double mean(std::span<const double> x) {
  if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
  double acc = 0.0;
  for (double v : x) acc += v - x[0];
  return x[0] + acc / static_cast<double>(x.size());
}

inline double median(std::span<const double> x) {
  if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
  return quantile(std::vector<double>(x.begin(), x.end()), 0.5);
}

inline double sum(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v;
  return acc;
}

inline double stddev(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

}  // namespace pwexp::stats
