#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "pwexp/rng.hpp"

namespace pwexp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Piecewise exponential distribution.
///
/// Piece k (0-based) has hazard rates()[k] on [d_{k-1}, d_k) with d_{-1} = 0
/// and d_r = +inf, so the hazard is right-continuous at each breakpoint.
/// The cumulative hazard is kept as a prefix sum over completed pieces.
class PweModel {
 public:
  PweModel() : PweModel({1.0}, {}) {}

  PweModel(std::vector<double> rates, std::vector<double> breakpoints)
      : rates_(std::move(rates)), breaks_(std::move(breakpoints)) {
    if (rates_.size() != breaks_.size() + 1) {
      throw std::invalid_argument("PweModel: need exactly one more rate than breakpoints (got " +
                                  std::to_string(rates_.size()) + " rates, " +
                                  std::to_string(breaks_.size()) + " breakpoints)");
    }
    for (double r : rates_) {
      if (!(r > 0.0) || !std::isfinite(r)) {
        throw std::invalid_argument("PweModel: hazard rates must be positive and finite");
      }
    }
    double prev = 0.0;
    for (double d : breaks_) {
      if (!(d > prev) || !std::isfinite(d)) {
        throw std::invalid_argument(
            "PweModel: breakpoints must be positive, finite and strictly increasing");
      }
      prev = d;
    }
    cum_.resize(breaks_.size() + 1);
    cum_[0] = 0.0;
    double start = 0.0;
    for (std::size_t k = 0; k < breaks_.size(); ++k) {
      cum_[k + 1] = cum_[k] + rates_[k] * (breaks_[k] - start);
      start = breaks_[k];
    }
  }

  static PweModel exponential(double rate) { return PweModel({rate}, {}); }

  const std::vector<double>& rates() const { return rates_; }
  const std::vector<double>& breakpoints() const { return breaks_; }
  std::size_t pieces() const { return rates_.size(); }

  /// Index of the piece containing t (t >= 0).
  std::size_t piece_of(double t) const {
    return static_cast<std::size_t>(std::upper_bound(breaks_.begin(), breaks_.end(), t) -
                                    breaks_.begin());
  }

  double piece_start(std::size_t k) const { return k == 0 ? 0.0 : breaks_[k - 1]; }

  double hazard(double t) const { return t < 0.0 ? 0.0 : rates_[piece_of(t)]; }

  double cumulative_hazard(double t) const {
    if (t <= 0.0) return 0.0;
    if (t == kInf) return kInf;
    const auto k = piece_of(t);
    return cum_[k] + rates_[k] * (t - piece_start(k));
  }

  double density(double t) const {
    if (t < 0.0) return 0.0;
    return hazard(t) * std::exp(-cumulative_hazard(t));
  }

  double survival(double t) const { return std::exp(-cumulative_hazard(t)); }

  double cdf(double t) const { return -std::expm1(-cumulative_hazard(t)); }

  /// Inverse of the cumulative hazard: smallest t with H(t) = h.
  double inverse_cumulative_hazard(double h) const {
    if (h <= 0.0) return 0.0;
    if (h == kInf) return kInf;
    const auto k = static_cast<std::size_t>(std::upper_bound(cum_.begin(), cum_.end(), h) -
                                            cum_.begin()) - 1;
    return piece_start(k) + (h - cum_[k]) / rates_[k];
  }

  /// Quantile function. quantile(1) is +inf.
  double quantile(double p) const {
    check_probability(p);
    return inverse_cumulative_hazard(-std::log1p(-p));
  }

  std::vector<double> sample(std::size_t n, Stream& rng) const {
    std::vector<double> out(n);
    for (auto& x : out) x = quantile(rng.uniform());
    return out;
  }

  // Distribution of T given T > given.

  double conditional_survival(double t, double given) const {
    check_condition(t, given);
    return std::exp(-(cumulative_hazard(t) - cumulative_hazard(given)));
  }

  double conditional_cdf(double t, double given) const {
    check_condition(t, given);
    return -std::expm1(-(cumulative_hazard(t) - cumulative_hazard(given)));
  }

  double conditional_quantile(double p, double given) const {
    check_probability(p);
    if (!(given >= 0.0)) throw std::domain_error("conditional_quantile: condition must be >= 0");
    if (p == 0.0) return given;
    return std::max(given, inverse_cumulative_hazard(cumulative_hazard(given) - std::log1p(-p)));
  }

  std::vector<double> conditional_sample(std::size_t n, double given, Stream& rng) const {
    std::vector<double> out(n);
    for (auto& x : out) x = conditional_quantile(rng.uniform(), given);
    return out;
  }

  friend bool operator==(const PweModel& a, const PweModel& b) {
    return a.rates_ == b.rates_ && a.breaks_ == b.breaks_;
  }

 private:
  static void check_probability(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("probability outside [0, 1]");
  }
  static void check_condition(double t, double given) {
    if (!(given >= 0.0) || t < given) {
      throw std::domain_error("conditional survival requires t >= given >= 0");
    }
  }

  std::vector<double> rates_;
  std::vector<double> breaks_;
  std::vector<double> cum_;  // cum_[k] = H(start of piece k)
};

}  // namespace pwexp
