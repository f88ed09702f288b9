#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "pwexp/distribution.hpp"
#include "pwexp/rng.hpp"
#include "pwexp/segmented.hpp"
#include "pwexp/survdata.hpp"

namespace pwexp {

/// A hazard piece with no events (or no exposure), so its MLE would be 0 or
/// undefined.
class EmptyPieceError : public std::runtime_error {
 public:
  EmptyPieceError(std::size_t piece, const std::string& what)
      : std::runtime_error(what), piece_(piece) {}
  std::size_t piece() const { return piece_; }

 private:
  std::size_t piece_;
};

class NoFeasibleModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Optimizer { bfs, ols, hybrid };

inline std::string_view to_string(Optimizer o) {
  switch (o) {
    case Optimizer::bfs: return "bfs";
    case Optimizer::ols: return "ols";
    case Optimizer::hybrid: return "hybrid";
  }
  return "hybrid";
}

inline Optimizer parse_optimizer(std::string_view s) {
  if (s == "bfs" || s == "mle") return Optimizer::bfs;
  if (s == "ols") return Optimizer::ols;
  if (s == "hybrid") return Optimizer::hybrid;
  throw std::invalid_argument("unknown optimizer '" + std::string(s) + "'");
}

/// Half-open interval [lower, upper) that may not contain a searched
/// change-point. upper may be +inf.
struct ExcludeInterval {
  double lower = 0.0;
  double upper = kInf;
  bool contains(double t) const { return t >= lower && t < upper; }
};

struct FitConfig {
  std::size_t nbreak = 0;
  std::vector<double> fixed_breakpoints;
  Optimizer optimizer = Optimizer::hybrid;
  std::size_t max_set = 10000;
  std::size_t min_pt_tail = 5;
  std::optional<ExcludeInterval> exclude_int;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  void validate() const {
    if (fixed_breakpoints.size() > nbreak && nbreak != 0) {
      throw std::invalid_argument("FitConfig: more fixed breakpoints than nbreak");
    }
    if (max_set < 1) throw std::invalid_argument("FitConfig: max_set must be >= 1");
    if (min_pt_tail < 1) throw std::invalid_argument("FitConfig: min_pt_tail must be >= 1");
    if (exclude_int && !(exclude_int->lower < exclude_int->upper)) {
      throw std::invalid_argument("FitConfig: empty exclude interval");
    }
  }
};

/// Per-piece sufficient statistics for a set of breakpoints.
struct PieceTally {
  std::vector<std::size_t> events;    // n_{D_k}
  std::vector<double> exposure;       // time at risk inside piece k
  std::vector<std::size_t> at_risk;   // subjects with T >= start of piece k (n_{k+})
};

inline PieceTally tally(const std::vector<double>& breakpoints, const SurvSample& data) {
  const auto pieces = breakpoints.size() + 1;
  PieceTally t{std::vector<std::size_t>(pieces, 0), std::vector<double>(pieces, 0.0),
               std::vector<std::size_t>(pieces, 0)};
  for (const auto& r : data.records) {
    const auto k = static_cast<std::size_t>(
        std::upper_bound(breakpoints.begin(), breakpoints.end(), r.time) - breakpoints.begin());
    if (r.event == 1) ++t.events[k];
    double start = 0.0;
    for (std::size_t j = 0; j <= k; ++j) {
      ++t.at_risk[j];
      const double end = j < breakpoints.size() ? breakpoints[j] : kInf;
      t.exposure[j] += std::min(r.time, end) - start;
      start = end;
    }
  }
  return t;
}

/// Log-likelihood of right-censored data: sum over events of log h(T_i)
/// minus the cumulative hazard summed over all records.
inline double loglik(const PweModel& m, const SurvSample& data) {
  double ll = 0.0;
  for (const auto& r : data.records) {
    if (r.event == 1) ll += std::log(m.hazard(r.time));
    ll -= m.cumulative_hazard(r.time);
  }
  return ll;
}

struct FitDiagnostics {
  std::size_t combinations_evaluated = 0;
  std::size_t combinations_feasible = 0;
  bool exhaustive = false;
  bool subsampled = false;
  // Segmented-regression stage (ols and hybrid only).
  std::vector<double> ols_breakpoints;  // estimated (free) breakpoints
  std::vector<double> ols_se;
  bool ols_fallback = false;
  std::vector<std::size_t> candidate_set_sizes;
};

struct FitResult {
  PweModel model;
  double loglik = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  std::size_t n_obs = 0;
  std::size_t n_param = 1;
  std::string optimizer;
  FitDiagnostics diagnostics;
  std::vector<std::string> warnings;
};

inline FitResult make_fit_result(PweModel model, double ll, std::size_t n_obs,
                                 std::string optimizer) {
  FitResult f;
  f.n_param = 2 * model.breakpoints().size() + 1;
  f.model = std::move(model);
  f.loglik = ll;
  f.n_obs = n_obs;
  f.aic = -2.0 * ll + 2.0 * static_cast<double>(f.n_param);
  f.bic = -2.0 * ll + static_cast<double>(f.n_param) * std::log(static_cast<double>(n_obs));
  f.optimizer = std::move(optimizer);
  return f;
}

namespace detail {

inline void check_fit_data(const SurvSample& data) {
  if (data.empty()) throw std::invalid_argument("fit: empty data");
  for (const auto& r : data.records) {
    if (!(r.time >= 0.0) || !std::isfinite(r.time)) {
      throw std::invalid_argument("fit: times must be finite and nonnegative");
    }
  }
  if (data.event_count() == 0) throw std::invalid_argument("fit: data has no events");
}

/// Profile log-likelihood of candidate breakpoint vectors in O(r log n).
/// Exposure up to x is G(x) = sum_i min(T_i, x), so the exposure of
/// [a, b) is G(b) - G(a).
class ProfileEvaluator {
 public:
  ProfileEvaluator(const SurvSample& data, std::size_t min_pt_tail,
                   std::optional<ExcludeInterval> exclude)
      : min_pt_tail_(min_pt_tail), exclude_(exclude) {
    times_ = data.times();
    std::sort(times_.begin(), times_.end());
    prefix_.assign(times_.size() + 1, 0.0);
    for (std::size_t i = 0; i < times_.size(); ++i) prefix_[i + 1] = prefix_[i] + times_[i];
    for (const auto& r : data.records)
      if (r.event == 1) events_.push_back(r.time);
    std::sort(events_.begin(), events_.end());
  }

  double exposure_to(double x) const {
    if (x == kInf) return prefix_.back();
    const auto j = static_cast<std::size_t>(std::lower_bound(times_.begin(), times_.end(), x) -
                                            times_.begin());
    return prefix_[j] + x * static_cast<double>(times_.size() - j);
  }

  std::size_t events_before(double x) const {
    if (x == kInf) return events_.size();
    return static_cast<std::size_t>(std::lower_bound(events_.begin(), events_.end(), x) -
                                    events_.begin());
  }

  /// Profile log-likelihood at the closed-form rates, or NaN when the
  /// vector is infeasible. `searched` marks entries subject to the
  /// exclusion interval (fixed breakpoints are exempt).
  double evaluate(const std::vector<double>& bps,
                  const std::vector<bool>* searched = nullptr) const {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t k = 0; k < bps.size(); ++k) {
      if (!(bps[k] > 0.0) || (k > 0 && !(bps[k] > bps[k - 1]))) return nan;
      if (exclude_ && (!searched || (*searched)[k]) && exclude_->contains(bps[k])) return nan;
    }
    if (!bps.empty() && events_.size() - events_before(bps.back()) < min_pt_tail_) return nan;
    double ll = 0.0;
    double a = 0.0;
    for (std::size_t k = 0; k <= bps.size(); ++k) {
      const double b = k < bps.size() ? bps[k] : kInf;
      const auto n = events_before(b) - events_before(a);
      const double e = exposure_to(b) - exposure_to(a);
      if (n == 0 || !(e > 0.0)) return nan;
      const double dn = static_cast<double>(n);
      ll += dn * (std::log(dn) - std::log(e));
      a = b;
    }
    return ll - static_cast<double>(events_.size());
  }

 private:
  std::vector<double> times_;
  std::vector<double> prefix_;
  std::vector<double> events_;
  std::size_t min_pt_tail_;
  std::optional<ExcludeInterval> exclude_;
};

struct SearchOutcome {
  std::vector<double> best;
  double loglik = -kInf;
  std::size_t evaluated = 0;
  std::size_t feasible = 0;
};

/// Evaluates candidate rows (each a sorted breakpoint vector) and keeps the
/// maximum, breaking ties toward the lexicographically smallest vector so
/// that the result does not depend on evaluation order.
inline SearchOutcome search_rows(const ProfileEvaluator& eval,
                                 const std::vector<std::vector<double>>& rows,
                                 const std::vector<std::vector<bool>>& searched, unsigned threads) {
  std::vector<double> ll(rows.size());
  parallel_for(rows.size(), threads,
               [&](std::size_t i) { ll[i] = eval.evaluate(rows[i], &searched[i]); });
  SearchOutcome out;
  out.evaluated = rows.size();
  bool have = false;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (std::isnan(ll[i])) continue;
    ++out.feasible;
    if (!have || ll[i] > out.loglik || (ll[i] == out.loglik && rows[i] < out.best)) {
      have = true;
      out.loglik = ll[i];
      out.best = rows[i];
    }
  }
  return out;
}

/// Merges pinned breakpoints with searched ones; returns false on a
/// duplicate.
inline bool assemble_row(const std::vector<double>& fixed, const std::vector<double>& free,
                         std::vector<double>& row, std::vector<bool>& searched) {
  std::vector<std::pair<double, bool>> all;
  all.reserve(fixed.size() + free.size());
  for (double d : fixed) all.emplace_back(d, false);
  for (double d : free) all.emplace_back(d, true);
  std::sort(all.begin(), all.end());
  row.clear();
  searched.clear();
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (i > 0 && all[i].first == all[i - 1].first) return false;
    row.push_back(all[i].first);
    searched.push_back(all[i].second);
  }
  return true;
}

/// k distinct values drawn from [0, n) (Floyd's algorithm), sorted.
inline std::vector<std::uint64_t> sample_indices(std::uint64_t n, std::uint64_t k, Stream& rng) {
  std::unordered_set<std::uint64_t> chosen;
  std::vector<std::uint64_t> out;
  for (std::uint64_t j = n - k; j < n; ++j) {
    const auto t = rng.index(j + 1);
    const auto pick = chosen.count(t) ? j : t;
    chosen.insert(pick);
    out.push_back(pick);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

/// Closed-form hazard MLEs at known breakpoints: events in each piece over
/// the exposure accumulated in it.
inline FitResult mle_given_breakpoints(const std::vector<double>& breakpoints,
                                       const SurvSample& data) {
  detail::check_fit_data(data);
  const auto t = tally(breakpoints, data);
  std::vector<double> rates(t.events.size());
  for (std::size_t k = 0; k < rates.size(); ++k) {
    if (t.events[k] == 0) {
      throw EmptyPieceError(k, "piece " + std::to_string(k + 1) + " contains no events");
    }
    if (!(t.exposure[k] > 0.0)) {
      throw EmptyPieceError(k, "piece " + std::to_string(k + 1) + " has zero exposure");
    }
    rates[k] = static_cast<double>(t.events[k]) / t.exposure[k];
  }
  PweModel model(std::move(rates), breakpoints);
  const double ll = loglik(model, data);
  return make_fit_result(std::move(model), ll, data.size(), "fixed");
}

struct BreakpointValidation {
  std::vector<double> breakpoints;
  std::vector<std::string> warnings;
};

/// Removes change-points with no events before or after them and merges
/// adjacent change-points with no events between them into their average.
inline BreakpointValidation validate_breakpoints(std::vector<double> bps, const SurvSample& data) {
  BreakpointValidation out;
  std::vector<double> ev;
  for (const auto& r : data.records)
    if (r.event == 1) ev.push_back(r.time);
  std::sort(ev.begin(), ev.end());
  auto count_in = [&](double a, double b) {  // events in [a, b)
    return std::lower_bound(ev.begin(), ev.end(), b) - std::lower_bound(ev.begin(), ev.end(), a);
  };
  std::sort(bps.begin(), bps.end());
  {
    auto last = std::unique(bps.begin(), bps.end());
    if (last != bps.end()) out.warnings.push_back("duplicate change-points removed");
    bps.erase(last, bps.end());
  }
  auto fmt = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::string(buf);
  };
  bool changed = true;
  while (changed && !bps.empty()) {
    changed = false;
    if (count_in(0.0, bps.front()) == 0) {
      out.warnings.push_back("change-point " + fmt(bps.front()) +
                             " has no events before it and was removed");
      bps.erase(bps.begin());
      changed = true;
      continue;
    }
    if (count_in(bps.back(), kInf) == 0) {
      out.warnings.push_back("change-point " + fmt(bps.back()) +
                             " has no events after it and was removed");
      bps.pop_back();
      changed = true;
      continue;
    }
    for (std::size_t i = 0; i + 1 < bps.size(); ++i) {
      if (count_in(bps[i], bps[i + 1]) == 0) {
        const double avg = 0.5 * (bps[i] + bps[i + 1]);
        out.warnings.push_back("change-points " + fmt(bps[i]) + " and " + fmt(bps[i + 1]) +
                               " have no events between them and were merged into " + fmt(avg));
        bps[i] = avg;
        bps.erase(bps.begin() + static_cast<std::ptrdiff_t>(i) + 1);
        changed = true;
        break;
      }
    }
  }
  out.breakpoints = std::move(bps);
  return out;
}

namespace detail {

inline FitResult finish(const std::vector<double>& bps, const SurvSample& data,
                        std::string optimizer) {
  auto f = mle_given_breakpoints(bps, data);
  f.optimizer = std::move(optimizer);
  return f;
}

inline std::vector<double> free_candidates(const SurvSample& data,
                                           const std::vector<double>& fixed) {
  auto cand = data.distinct_event_times();
  std::erase_if(cand, [&](double t) {
    return std::find(fixed.begin(), fixed.end(), t) != fixed.end();
  });
  return cand;
}

}  // namespace detail

/// Brute-force search over change-points placed at event times. When the
/// number of combinations exceeds max_set, candidates are first
/// sub-sampled by bisection on the candidate count and then max_set
/// combinations are drawn at random.
inline FitResult fit_bfs(const SurvSample& data, const FitConfig& config) {
  config.validate();
  detail::check_fit_data(data);
  const auto& fixed = config.fixed_breakpoints;
  if (config.nbreak < 1 || config.nbreak < fixed.size()) {
    throw std::invalid_argument("fit_bfs: nbreak must be >= 1 and >= number of fixed breakpoints");
  }
  const std::size_t nfree = config.nbreak - fixed.size();
  Stream rng(config.seed);
  auto cand = detail::free_candidates(data, fixed);
  FitDiagnostics diag;
  if (cand.size() < nfree) throw NoFeasibleModelError("fit_bfs: too few distinct event times");

  const auto max_set = config.max_set;
  if (detail::binomial(cand.size(), nfree) > static_cast<double>(max_set)) {
    std::size_t nl = 1, nr = cand.size();
    do {
      const std::size_t mid = (nl + nr) / 2;
      if (detail::binomial(mid, nfree) > static_cast<double>(max_set))
        nr = mid;
      else
        nl = mid;
    } while (nr - nl >= 2);
    const auto pick = detail::sample_indices(cand.size(), nr, rng);
    std::vector<double> sub;
    for (auto i : pick) sub.push_back(cand[i]);
    cand = std::move(sub);
    diag.subsampled = true;
  }

  std::vector<std::vector<double>> free_rows;
  detail::for_each_combination(cand.size(), nfree, [&](const auto& idx) {
    std::vector<double> row;
    for (auto i : idx) row.push_back(cand[i]);
    free_rows.push_back(std::move(row));
    return true;
  });
  if (free_rows.size() > max_set) {
    const auto keep = detail::sample_indices(free_rows.size(), max_set, rng);
    std::vector<std::vector<double>> kept;
    kept.reserve(keep.size());
    for (auto i : keep) kept.push_back(std::move(free_rows[i]));
    free_rows = std::move(kept);
  } else {
    diag.exhaustive = !diag.subsampled;
  }

  std::vector<std::vector<double>> rows;
  std::vector<std::vector<bool>> searched;
  for (const auto& fr : free_rows) {
    std::vector<double> row;
    std::vector<bool> s;
    if (!detail::assemble_row(fixed, fr, row, s)) continue;
    rows.push_back(std::move(row));
    searched.push_back(std::move(s));
  }
  detail::ProfileEvaluator eval(data, config.min_pt_tail, config.exclude_int);
  auto outcome = detail::search_rows(eval, rows, searched, config.threads);
  diag.combinations_evaluated = outcome.evaluated;
  diag.combinations_feasible = outcome.feasible;
  if (outcome.feasible == 0) {
    throw NoFeasibleModelError("fit_bfs: no feasible change-point combination (" +
                               std::to_string(outcome.evaluated) + " evaluated)");
  }
  auto f = detail::finish(outcome.best, data, "bfs");
  f.diagnostics = std::move(diag);
  return f;
}

namespace detail {

struct OlsStage {
  SegmentedFit seg;
  std::vector<double> breakpoints;  // fixed and free, sorted
};

inline OlsStage ols_stage(const SurvSample& data, const FitConfig& config, Stream& rng) {
  const auto& fixed = config.fixed_breakpoints;
  const std::size_t nfree = config.nbreak - fixed.size();
  const auto km = km_fit(data);
  std::vector<double> x, y;
  for (const auto& st : km.steps) {
    if (st.survival > 0.0) {
      x.push_back(st.time);
      y.push_back(std::log(st.survival));
    }
  }
  if (x.size() < 2 * (config.nbreak + 1)) {
    throw NoFeasibleModelError("ols: need at least " + std::to_string(2 * (config.nbreak + 1)) +
                               " positive Kaplan-Meier steps, have " + std::to_string(x.size()));
  }
  ProfileEvaluator eval(data, config.min_pt_tail, config.exclude_int);
  std::vector<double> fixed_sorted = fixed;
  std::sort(fixed_sorted.begin(), fixed_sorted.end());
  auto accept = [&](const std::vector<double>& all) {
    std::vector<bool> searched(all.size());
    for (std::size_t i = 0; i < all.size(); ++i)
      searched[i] = std::find(fixed.begin(), fixed.end(), all[i]) == fixed.end();
    return !std::isnan(eval.evaluate(all, &searched));
  };
  SegmentedOptions opt;
  opt.max_set = config.max_set;
  auto cand = free_candidates(data, fixed);
  OlsStage out;
  out.seg = segmented_regression(x, y, fixed_sorted, nfree, cand, rng, opt, accept);
  if (out.seg.free_breaks.size() != nfree) {
    throw NoFeasibleModelError("ols: no admissible change-point configuration");
  }
  out.breakpoints = merged(fixed_sorted, out.seg.free_breaks);
  return out;
}

}  // namespace detail

/// Change-points from a continuous piecewise-linear least-squares fit to the
/// log Kaplan-Meier curve; hazards are then the closed-form MLEs at those
/// change-points. This is not a likelihood maximizer.
inline FitResult fit_ols(const SurvSample& data, const FitConfig& config) {
  config.validate();
  detail::check_fit_data(data);
  if (config.nbreak < config.fixed_breakpoints.size()) {
    throw std::invalid_argument("fit_ols: nbreak < number of fixed breakpoints");
  }
  Stream rng(config.seed);
  auto stage = detail::ols_stage(data, config, rng);
  std::vector<std::string> warnings;
  if (stage.seg.fallback) {
    warnings.push_back("segmented regression did not converge; used SSE grid search");
  }
  auto v = validate_breakpoints(stage.breakpoints, data);
  warnings.insert(warnings.end(), v.warnings.begin(), v.warnings.end());
  auto f = detail::finish(v.breakpoints, data, "ols");
  f.diagnostics.ols_breakpoints = stage.seg.free_breaks;
  f.diagnostics.ols_se = stage.seg.se;
  f.diagnostics.ols_fallback = stage.seg.fallback;
  f.warnings = std::move(warnings);
  return f;
}

/// Exhaustive likelihood search over event times near the least-squares
/// change-points: each free change-point ranges over the event times in its
/// 95% normal interval, widened to the nearest event times that fit its
/// share of max_set (and never fewer than 3).
inline FitResult fit_hybrid(const SurvSample& data, const FitConfig& config) {
  config.validate();
  detail::check_fit_data(data);
  const auto& fixed = config.fixed_breakpoints;
  if (config.nbreak < 1 || config.nbreak < fixed.size()) {
    throw std::invalid_argument("fit_hybrid: nbreak must be >= 1 and >= fixed breakpoints");
  }
  Stream rng(config.seed);
  auto stage = detail::ols_stage(data, config, rng);
  const auto& psi = stage.seg.free_breaks;
  const auto& se = stage.seg.se;
  FitDiagnostics diag;
  diag.ols_breakpoints = psi;
  diag.ols_se = se;
  diag.ols_fallback = stage.seg.fallback;

  const auto events = detail::free_candidates(data, fixed);
  const double spacing =
      events.size() > 1 ? (events.back() - events.front()) / static_cast<double>(events.size() - 1)
                        : 1.0;
  // The interval alone is usually far narrower than the search budget
  // allows, so each set is widened to its share of max_set.
  std::size_t share = 1;
  if (!psi.empty()) {
    const double root = std::pow(static_cast<double>(config.max_set), 1.0 / static_cast<double>(psi.size()));
    share = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(root + 1e-9)));
  }
  std::vector<std::vector<double>> sets;
  std::vector<double> snapped;
  for (std::size_t k = 0; k < psi.size(); ++k) {
    const double half = (k < se.size() && std::isfinite(se[k])) ? 1.96 * se[k] : 3.0 * spacing;
    std::size_t in_ci = 0;
    for (double t : events) in_ci += std::abs(t - psi[k]) <= half ? 1 : 0;
    std::vector<double> by_distance = events;
    std::sort(by_distance.begin(), by_distance.end(), [&](double a, double b) {
      const double da = std::abs(a - psi[k]), db = std::abs(b - psi[k]);
      return da < db || (da == db && a < b);
    });
    const std::size_t keep = std::min(by_distance.size(), std::max({in_ci, std::size_t{3}, share}));
    std::vector<double> set(by_distance.begin(), by_distance.begin() + static_cast<std::ptrdiff_t>(keep));
    std::sort(set.begin(), set.end());
    if (!by_distance.empty()) snapped.push_back(by_distance.front());
    diag.candidate_set_sizes.push_back(set.size());
    sets.push_back(std::move(set));
  }

  double total = 1.0;
  for (const auto& s : sets) total *= static_cast<double>(s.size());
  auto decode = [&](std::uint64_t idx) {
    std::vector<double> row(sets.size());
    for (std::size_t k = sets.size(); k-- > 0;) {
      row[k] = sets[k][idx % sets[k].size()];
      idx /= sets[k].size();
    }
    return row;
  };
  std::vector<std::vector<double>> free_rows;
  if (total <= static_cast<double>(config.max_set)) {
    const auto n = static_cast<std::uint64_t>(total);
    for (std::uint64_t i = 0; i < n; ++i) free_rows.push_back(decode(i));
    diag.exhaustive = true;
  } else {
    if (total > 9e18) throw NoFeasibleModelError("fit_hybrid: candidate grid too large");
    for (auto i : detail::sample_indices(static_cast<std::uint64_t>(total), config.max_set, rng))
      free_rows.push_back(decode(i));
    std::sort(snapped.begin(), snapped.end());
    free_rows.push_back(snapped);
  }

  std::vector<std::vector<double>> rows;
  std::vector<std::vector<bool>> searched;
  for (const auto& fr : free_rows) {
    if (!std::is_sorted(fr.begin(), fr.end()) ||
        std::adjacent_find(fr.begin(), fr.end()) != fr.end()) {
      continue;
    }
    std::vector<double> row;
    std::vector<bool> s;
    if (!detail::assemble_row(fixed, fr, row, s)) continue;
    rows.push_back(std::move(row));
    searched.push_back(std::move(s));
  }
  detail::ProfileEvaluator eval(data, config.min_pt_tail, config.exclude_int);
  auto outcome = detail::search_rows(eval, rows, searched, config.threads);
  diag.combinations_evaluated = outcome.evaluated;
  diag.combinations_feasible = outcome.feasible;
  if (outcome.feasible == 0) {
    throw NoFeasibleModelError("fit_hybrid: no feasible change-point combination");
  }
  auto f = detail::finish(outcome.best, data, "hybrid");
  f.diagnostics = std::move(diag);
  if (stage.seg.fallback) {
    f.warnings.push_back("segmented regression did not converge; used SSE grid search");
  }
  return f;
}

/// Exponential MLE: events over total time at risk.
inline FitResult fit_exponential(const SurvSample& data) {
  detail::check_fit_data(data);
  auto f = mle_given_breakpoints({}, data);
  f.optimizer = "exponential";
  return f;
}

/// Full estimation pipeline: validates fixed change-points, then either
/// computes the closed-form MLE (all change-points known) or searches for
/// the unknown ones with the configured optimizer.
inline FitResult fit(const SurvSample& data, const FitConfig& config) {
  config.validate();
  detail::check_fit_data(data);
  if (config.nbreak == 0 && config.fixed_breakpoints.empty()) return fit_exponential(data);

  FitConfig cfg = config;
  std::vector<std::string> warnings;
  if (!cfg.fixed_breakpoints.empty()) {
    auto v = validate_breakpoints(cfg.fixed_breakpoints, data);
    warnings = std::move(v.warnings);
    cfg.fixed_breakpoints = std::move(v.breakpoints);
  }
  const bool all_known = config.nbreak == 0 || config.nbreak == config.fixed_breakpoints.size();
  FitResult f;
  if (all_known) {
    f = mle_given_breakpoints(cfg.fixed_breakpoints, data);
  } else {
    switch (cfg.optimizer) {
      case Optimizer::bfs: f = fit_bfs(data, cfg); break;
      case Optimizer::ols: f = fit_ols(data, cfg); break;
      case Optimizer::hybrid: f = fit_hybrid(data, cfg); break;
    }
  }
  warnings.insert(warnings.end(), f.warnings.begin(), f.warnings.end());
  f.warnings = std::move(warnings);
  return f;
}

}  // namespace pwexp
