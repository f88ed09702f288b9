#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "pwexp/rng.hpp"

namespace pwexp {

/// Enrollment schedule: either a constant rate (subjects per month) or
/// explicit per-month counts, starting at calendar time `start`. Subjects
/// enroll uniformly within their month.
struct AccrualPlan {
  double start = 0.0;
  std::optional<double> rate;
  std::vector<double> monthly_counts;
  std::size_t total = 0;

  static AccrualPlan from_rate(double rate, std::size_t total, double start = 0.0) {
    AccrualPlan p;
    p.start = start;
    p.rate = rate;
    p.total = total;
    return p;
  }

  static AccrualPlan from_counts(std::vector<double> counts, double start = 0.0) {
    AccrualPlan p;
    p.start = start;
    double sum = 0.0;
    for (double c : counts) {
      if (!(c >= 0.0)) throw std::invalid_argument("accrual: monthly counts must be nonnegative");
      sum += std::round(c);
    }
    p.monthly_counts = std::move(counts);
    p.total = static_cast<std::size_t>(sum);
    return p;
  }

  /// Month index (0-based, relative to start) of the j-th subject.
  std::size_t month_of(std::size_t j) const {
    if (rate) {
      if (!(*rate > 0.0)) throw std::invalid_argument("accrual: rate must be positive");
      return static_cast<std::size_t>(std::floor(static_cast<double>(j) / *rate));
    }
    double cum = 0.0;
    for (std::size_t m = 0; m < monthly_counts.size(); ++m) {
      cum += std::round(monthly_counts[m]);
      if (static_cast<double>(j) < cum) return m;
    }
    throw std::invalid_argument("accrual plan exhausted before all subjects were placed");
  }

  /// Calendar time when enrollment of `total` subjects completes at the latest.
  double end() const {
    if (total == 0) return start;
    return start + static_cast<double>(month_of(total - 1)) + 1.0;
  }

  /// Enrollment times of the `total` subjects, in enrollment order.
  std::vector<double> draw(Stream& rng) const {
    std::vector<double> out(total);
    for (std::size_t j = 0; j < total; ++j)
      out[j] = start + static_cast<double>(month_of(j)) + rng.uniform();
    return out;
  }
};

}  // namespace pwexp
