#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "pwexp/rng.hpp"
#include "pwexp/stats.hpp"

namespace pwexp {

/// Continuous piecewise-linear least squares through the origin,
///
///   y = a*x + sum_j b_j * (x - tau_j)_+ ,
///
/// with some breakpoints tau held fixed and the rest estimated by iterative
/// linearization (each iteration regresses on (x - psi)_+ and -I(x > psi),
/// then moves psi by gamma / beta with step halving on the SSE).
struct SegmentedOptions {
  int restarts = 5;
  int max_iter = 50;
  double rel_tol = 1e-8;
  std::size_t max_set = 10000;  // cap on rows for the grid-search fallback
};

struct SegmentedFit {
  std::vector<double> free_breaks;  // sorted
  std::vector<double> se;           // NaN when unavailable
  double sse = std::numeric_limits<double>::infinity();
  bool converged = false;
  bool fallback = false;
};

namespace detail {

inline double pos(double v) { return v > 0.0 ? v : 0.0; }

/// Breakpoints are admissible when each segment, including the first and
/// the one after the last breakpoint, holds at least one x value.
inline bool admissible_breaks(std::span<const double> x_sorted, std::vector<double> taus) {
  std::sort(taus.begin(), taus.end());
  for (std::size_t j = 0; j + 1 < taus.size(); ++j)
    if (!(taus[j] < taus[j + 1])) return false;
  double lo = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j <= taus.size(); ++j) {
    const double hi = j < taus.size() ? taus[j] : std::numeric_limits<double>::infinity();
    // x in (lo, hi]
    auto first = std::upper_bound(x_sorted.begin(), x_sorted.end(), lo);
    auto last = std::upper_bound(x_sorted.begin(), x_sorted.end(), hi);
    if (j == taus.size()) last = x_sorted.end();
    if (first == last) return false;
    lo = hi;
  }
  return true;
}

/// Least-squares SSE of the profile model at fixed breakpoints. Returns +inf
/// for a rank-deficient design.
inline double profile_sse(std::span<const double> x, std::span<const double> y,
                          std::span<const double> taus) {
  const auto n = static_cast<Eigen::Index>(x.size());
  const auto p = static_cast<Eigen::Index>(taus.size() + 1);
  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd Y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = x[i];
    for (Eigen::Index j = 1; j < p; ++j) X(i, j) = pos(x[i] - taus[j - 1]);
    Y(i) = y[i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < p) return std::numeric_limits<double>::infinity();
  const Eigen::VectorXd coef = qr.solve(Y);
  return (Y - X * coef).squaredNorm();
}

struct Linearized {
  Eigen::VectorXd coef;
  Eigen::MatrixXd cov;
  bool ok = false;
};

/// Regression on x, (x - tau)_+ for all breakpoints and -I(x > psi) for the
/// free ones. Columns: [x | U(fixed) | U(free) | V(free)].
inline Linearized linearized_fit(std::span<const double> x, std::span<const double> y,
                                 std::span<const double> fixed, std::span<const double> free) {
  const auto n = static_cast<Eigen::Index>(x.size());
  const auto nf = static_cast<Eigen::Index>(fixed.size());
  const auto m = static_cast<Eigen::Index>(free.size());
  const Eigen::Index p = 1 + nf + 2 * m;
  Linearized out;
  if (n <= p) return out;
  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd Y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = x[i];
    for (Eigen::Index j = 0; j < nf; ++j) X(i, 1 + j) = pos(x[i] - fixed[j]);
    for (Eigen::Index k = 0; k < m; ++k) {
      X(i, 1 + nf + k) = pos(x[i] - free[k]);
      X(i, 1 + nf + m + k) = x[i] > free[k] ? -1.0 : 0.0;
    }
    Y(i) = y[i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < p) return out;
  out.coef = qr.solve(Y);
  const double sse = (Y - X * out.coef).squaredNorm();
  const double sigma2 = sse / static_cast<double>(n - p);
  out.cov = sigma2 * (X.transpose() * X).inverse();
  out.ok = out.coef.allFinite();
  return out;
}

inline std::vector<double> merged(std::span<const double> fixed, std::span<const double> free) {
  std::vector<double> all(fixed.begin(), fixed.end());
  all.insert(all.end(), free.begin(), free.end());
  std::sort(all.begin(), all.end());
  return all;
}

struct Run {
  std::vector<double> psi;
  double sse;
  bool converged;
};

inline Run iterate(std::span<const double> x, std::span<const double> y,
                   std::span<const double> x_sorted, std::span<const double> fixed,
                   std::vector<double> psi, const SegmentedOptions& opt) {
  const double range = x_sorted.back() - x_sorted.front();
  const double tol = opt.rel_tol * (range > 0.0 ? range : 1.0);
  auto sse_at = [&](const std::vector<double>& p) {
    auto all = merged(fixed, p);
    if (!admissible_breaks(x_sorted, all)) return std::numeric_limits<double>::infinity();
    return profile_sse(x, y, all);
  };
  double sse = sse_at(psi);
  if (!std::isfinite(sse)) return {psi, sse, false};
  for (int it = 0; it < opt.max_iter; ++it) {
    const auto lin = linearized_fit(x, y, fixed, psi);
    if (!lin.ok) return {psi, sse, false};
    const auto nf = fixed.size();
    const auto m = psi.size();
    std::vector<double> step(m);
    for (std::size_t k = 0; k < m; ++k) {
      const double beta = lin.coef(static_cast<Eigen::Index>(1 + nf + k));
      const double gamma = lin.coef(static_cast<Eigen::Index>(1 + nf + m + k));
      if (std::abs(beta) < 1e-300) return {psi, sse, false};
      step[k] = gamma / beta;
    }
    bool accepted = false;
    std::vector<double> cand(m);
    double cand_sse = sse;
    for (double h = 1.0; h >= 1.0 / 1024.0; h /= 2.0) {
      for (std::size_t k = 0; k < m; ++k) cand[k] = psi[k] + h * step[k];
      cand_sse = sse_at(cand);
      if (cand_sse <= sse) {
        accepted = true;
        break;
      }
    }
    if (!accepted) return {psi, sse, true};
    double move = 0.0;
    for (std::size_t k = 0; k < m; ++k) move = std::max(move, std::abs(cand[k] - psi[k]));
    psi = cand;
    sse = cand_sse;
    if (move < tol) return {psi, sse, true};
  }
  return {psi, sse, false};
}

/// Visits up to `cap` k-subsets of {0..n-1} in lexicographic order.
inline void for_each_combination(std::size_t n, std::size_t k,
                                 const std::function<bool(const std::vector<std::size_t>&)>& fn) {
  if (k > n) return;
  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    if (!fn(idx)) return;
    if (k == 0) return;
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + i - 1) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

inline double binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  k = std::min(k, n - k);
  double c = 1.0;
  for (std::size_t i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
  return std::round(c);
}

}  // namespace detail

/// Fits the segmented model to (x, y). `candidates` are the positions tried
/// by the SSE grid search used when no restart converges; `accept` filters
/// the full breakpoint vector (fixed and free, sorted) for that search.
inline SegmentedFit segmented_regression(
    std::span<const double> x, std::span<const double> y, std::span<const double> fixed,
    std::size_t nfree, std::span<const double> candidates, Stream& rng,
    const SegmentedOptions& opt = {},
    const std::function<bool(const std::vector<double>&)>& accept = {}) {
  if (x.size() != y.size() || x.empty()) throw std::invalid_argument("segmented: bad input sizes");
  std::vector<double> xs(x.begin(), x.end());
  std::sort(xs.begin(), xs.end());
  SegmentedFit best;

  if (nfree == 0) {
    auto all = detail::merged(fixed, {});
    best.sse = detail::profile_sse(x, y, all);
    best.converged = std::isfinite(best.sse);
    return best;
  }

  std::vector<std::vector<double>> starts;
  {
    std::vector<double> init(nfree);
    for (std::size_t k = 0; k < nfree; ++k)
      init[k] = stats::quantile(xs, static_cast<double>(k + 1) / static_cast<double>(nfree + 1));
    starts.push_back(init);
  }
  // Interior points only, so that every segment can be nonempty.
  std::vector<double> interior;
  for (std::size_t i = 1; i + 1 < xs.size(); ++i)
    if (xs[i] > xs.front() && xs[i] < xs.back()) interior.push_back(xs[i]);
  interior.erase(std::unique(interior.begin(), interior.end()), interior.end());
  for (int r = 1; r < opt.restarts && interior.size() >= nfree; ++r) {
    std::vector<double> pool = interior;
    std::vector<double> init(nfree);
    for (std::size_t k = 0; k < nfree; ++k) {
      const auto j = k + rng.index(pool.size() - k);
      std::swap(pool[k], pool[j]);
      init[k] = pool[k];
    }
    std::sort(init.begin(), init.end());
    starts.push_back(init);
  }

  bool have = false;
  std::vector<double> best_psi;
  for (const auto& s : starts) {
    auto run = detail::iterate(x, y, xs, fixed, s, opt);
    if (!run.converged || !std::isfinite(run.sse)) continue;
    if (!have || run.sse < best.sse) {
      have = true;
      best.sse = run.sse;
      best_psi = run.psi;
    }
  }

  if (have) {
    best.converged = true;
    const auto lin = detail::linearized_fit(x, y, fixed, best_psi);
    std::vector<std::size_t> order(nfree);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return best_psi[a] < best_psi[b]; });
    const auto nf = fixed.size();
    for (auto k : order) {
      best.free_breaks.push_back(best_psi[k]);
      double se = std::numeric_limits<double>::quiet_NaN();
      if (lin.ok) {
        const auto b = static_cast<Eigen::Index>(1 + nf + k);
        const auto g = static_cast<Eigen::Index>(1 + nf + nfree + k);
        const double beta = lin.coef(b);
        const double ratio = lin.coef(g) / beta;
        const double var = (lin.cov(g, g) - 2.0 * ratio * lin.cov(g, b) +
                            ratio * ratio * lin.cov(b, b)) / (beta * beta);
        if (std::isfinite(var) && var >= 0.0) se = std::sqrt(var);
      }
      best.se.push_back(se);
    }
    if (!accept || accept(detail::merged(fixed, best.free_breaks))) return best;
  }

  // Grid search on the SSE over candidate positions.
  SegmentedFit grid;
  grid.fallback = true;
  std::vector<double> cand(candidates.begin(), candidates.end());
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  const double total = detail::binomial(cand.size(), nfree);
  std::vector<std::vector<double>> rows;
  if (total <= static_cast<double>(opt.max_set)) {
    detail::for_each_combination(cand.size(), nfree, [&](const auto& idx) {
      std::vector<double> row;
      for (auto i : idx) row.push_back(cand[i]);
      rows.push_back(std::move(row));
      return true;
    });
  } else {
    for (std::size_t r = 0; r < opt.max_set; ++r) {
      std::vector<double> pool = cand;
      std::vector<double> row(nfree);
      for (std::size_t k = 0; k < nfree; ++k) {
        const auto j = k + rng.index(pool.size() - k);
        std::swap(pool[k], pool[j]);
        row[k] = pool[k];
      }
      std::sort(row.begin(), row.end());
      rows.push_back(std::move(row));
    }
  }
  for (const auto& row : rows) {
    auto all = detail::merged(fixed, row);
    if (!detail::admissible_breaks(xs, all)) continue;
    if (accept && !accept(all)) continue;
    const double sse = detail::profile_sse(x, y, all);
    if (sse < grid.sse || (sse == grid.sse && row < grid.free_breaks)) {
      grid.sse = sse;
      grid.free_breaks = row;
    }
  }
  grid.se.assign(grid.free_breaks.size(), std::numeric_limits<double>::quiet_NaN());
  grid.converged = !grid.free_breaks.empty();
  if (!grid.converged && have) return best;
  return grid;
}

}  // namespace pwexp
