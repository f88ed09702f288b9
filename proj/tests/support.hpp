#pragma once

// Shared helpers for the test suites: KS statistic, random model and data
// generators, and the simulated trial used by the end-to-end checks.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "pwexp/pwexp.hpp"

namespace pwexp::testing {

/// One-sample Kolmogorov-Smirnov statistic of x against cdf.
inline double ks_statistic(std::vector<double> x, const std::function<double(double)>& cdf) {
  std::sort(x.begin(), x.end());
  const auto n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

/// Asymptotic 1% critical value.
inline double ks_critical_1pct(std::size_t n) { return 1.628 / std::sqrt(static_cast<double>(n)); }

inline double uniform(Stream& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

/// Random model with 0..max_breaks change-points in (0, 30) and rates in
/// (0.005, 0.5), log-uniform.
inline PweModel random_model(Stream& rng, std::size_t max_breaks = 3) {
  const std::size_t r = rng.index(max_breaks + 1);
  std::vector<double> b;
  while (b.size() < r) {
    const double d = uniform(rng, 0.5, 30.0);
    if (std::none_of(b.begin(), b.end(), [&](double x) { return std::abs(x - d) < 0.1; })) b.push_back(d);
  }
  std::sort(b.begin(), b.end());
  std::vector<double> rates(r + 1);
  for (auto& l : rates) l = std::exp(uniform(rng, std::log(0.005), std::log(0.5)));
  return PweModel(rates, b);
}

/// Right-censored sample: event times from m, independent exponential
/// censoring at rate `censor_rate` (0 disables censoring).
inline SurvSample random_sample(const PweModel& m, std::size_t n, double censor_rate, Stream& rng) {
  SurvSample s;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = m.quantile(rng.uniform());
    const double c = censor_rate > 0.0 ? -std::log(rng.uniform()) / censor_rate : kInf;
    s.records.push_back({std::min(t, c), t <= c ? 1 : 0, {}, {}, CensorReason::none});
  }
  return s;
}

/// The worked scenario: 1000 subjects enrolled at 20 per month, event
/// rates (0.1, 0.01, 0.2) with change-points (5, 14), monthly drop-out 3%.
inline TrialDesign scenario_design() {
  TrialDesign d;
  d.enrollment = AccrualPlan::from_rate(20.0, 1000);
  const PweModel event({0.1, 0.01, 0.2}, {5.0, 14.0});
  d.dists = {{ArmDistributions{pwe_sampler(event), {}, {}}}};
  d.drop_rate = 0.03;
  return d;
}

inline PweModel scenario_event_model() { return PweModel({0.1, 0.01, 0.2}, {5.0, 14.0}); }
inline double scenario_drop_hazard() { return drop_hazard(0.03); }

/// Two-arm design with staggered accrual (660 subjects over 24 months),
/// control hazard from the fitted lymphoma model, hazard ratio 0.6 and
/// monthly drop-out 1%.
inline PweModel lymphoma_model() {
  return PweModel({0.023956, 0.009931584, 0.004189957}, {14.716, 29.85});
}

inline TrialDesign staggered_design() {
  std::vector<double> counts(12, 15.0);
  for (double c : {21.0, 27.0, 33.0, 39.0}) counts.push_back(c);
  for (int i = 0; i < 8; ++i) counts.push_back(45.0);
  TrialDesign d;
  d.enrollment = AccrualPlan::from_counts(counts);
  d.groups = {"trt", "con"};
  d.allocation = {1.0, 1.0};
  auto trt = lymphoma_model().rates();
  for (auto& r : trt) r *= 0.6;
  d.dists = {{ArmDistributions{pwe_sampler(PweModel(trt, lymphoma_model().breakpoints())), {}, {}}},
             {ArmDistributions{pwe_sampler(lymphoma_model()), {}, {}}}};
  d.drop_rate = 0.01;
  return d;
}

struct CutTrial {
  std::vector<TrialRecord> full;
  SurvSample train;
  double cut = 0.0;
};

/// Simulates the scenario and cuts it when 80% of subjects are randomized.
inline CutTrial scenario_trial(std::uint64_t seed) {
  CutTrial t;
  t.full = simulate_trial(scenario_design(), seed);
  std::vector<double> rand;
  for (const auto& r : t.full) rand.push_back(r.randT);
  t.cut = stats::quantile(rand, 0.8);
  t.train = cut_data(to_sample(t.full), t.cut);
  return t;
}

}  // namespace pwexp::testing

namespace pwexp::testing {

/// Numeric MLE of the hazard rates at fixed breakpoints, by bisection on a
/// central-difference derivative of the log-likelihood in log(rate), one
/// coordinate at a time. Independent of the closed-form estimator.
inline std::vector<double> numeric_rate_mle(const std::vector<double>& bps, const SurvSample& data,
                                            int sweeps = 2) {
  std::vector<double> rates(bps.size() + 1, 0.05);
  auto ll_at = [&](std::size_t k, double log_rate) {
    auto r = rates;
    r[k] = std::exp(log_rate);
    return loglik(PweModel(r, bps), data);
  };
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (std::size_t k = 0; k < rates.size(); ++k) {
      const double h = 1e-4;
      auto slope = [&](double u) { return (ll_at(k, u + h) - ll_at(k, u - h)) / (2.0 * h); };
      double lo = std::log(1e-9), hi = std::log(1e4);
      for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
        const double mid = 0.5 * (lo + hi);
        (slope(mid) > 0.0 ? lo : hi) = mid;
      }
      rates[k] = std::exp(0.5 * (lo + hi));
    }
  }
  return rates;
}

/// Largest |d loglik / d rate_k| * rate_k by central differences at
/// relative step 1e-5.
inline double max_scaled_score(const PweModel& m, const SurvSample& data) {
  double worst = 0.0;
  for (std::size_t k = 0; k < m.rates().size(); ++k) {
    auto up = m.rates(), dn = m.rates();
    const double h = 1e-5 * m.rates()[k];
    up[k] += h;
    dn[k] -= h;
    const double g = (loglik(PweModel(up, m.breakpoints()), data) -
                      loglik(PweModel(dn, m.breakpoints()), data)) / (2.0 * h);
    worst = std::max(worst, std::abs(g * m.rates()[k]));
  }
  return worst;
}

/// Random small dataset together with random breakpoints such that every
/// piece holds at least one event.
struct SmallCase {
  SurvSample data;
  std::vector<double> breakpoints;
};

inline SmallCase random_small_case(Stream& rng) {
  while (true) {
    const auto m = random_model(rng, 2);
    const std::size_t n = 15 + rng.index(40);
    SmallCase c{random_sample(m, n, 0.01 + 0.05 * rng.uniform(), rng), {}};
    auto ev = c.data.distinct_event_times();
    if (ev.size() < 4) continue;
    const std::size_t r = 1 + rng.index(std::min<std::size_t>(3, ev.size() / 2));
    for (std::size_t k = 0; k < r; ++k) c.breakpoints.push_back(uniform(rng, ev.front(), ev.back()));
    std::sort(c.breakpoints.begin(), c.breakpoints.end());
    const auto t = tally(c.breakpoints, c.data);
    bool ok = std::adjacent_find(c.breakpoints.begin(), c.breakpoints.end()) == c.breakpoints.end();
    for (auto e : t.events) ok = ok && e > 0;
    if (ok) return c;
  }
}

/// Exhaustive maximum over all change-point vectors drawn from distinct
/// event times, computed directly from the likelihood with naive per-piece
/// rates. Returns the breakpoints and log-likelihood of the best vector
/// (ties to the lexicographically smallest).
struct EnumerationBest {
  std::vector<double> breakpoints;
  double loglik = -kInf;
};

inline EnumerationBest enumerate_all(const SurvSample& data, std::size_t r, std::size_t min_tail) {
  const auto cand = data.distinct_event_times();
  EnumerationBest best;
  std::vector<std::size_t> idx(r);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t depth, std::size_t from) {
    if (depth == r) {
      std::vector<double> bps;
      for (auto i : idx) bps.push_back(cand[i]);
      std::vector<double> ev(r + 1, 0.0), ex(r + 1, 0.0);
      for (const auto& rec_ : data.records) {
        double start = 0.0;
        for (std::size_t k = 0; k <= r; ++k) {
          const double end = k < r ? bps[k] : kInf;
          if (rec_.time >= start) ex[k] += std::min(rec_.time, end) - start;
          if (rec_.event == 1 && rec_.time >= start && rec_.time < end) ev[k] += 1.0;
          start = end;
        }
      }
      for (std::size_t k = 0; k <= r; ++k)
        if (ev[k] == 0.0 || ex[k] <= 0.0) return;
      if (ev[r] < static_cast<double>(min_tail)) return;
      std::vector<double> rates(r + 1);
      for (std::size_t k = 0; k <= r; ++k) rates[k] = ev[k] / ex[k];
      const double ll = loglik(PweModel(rates, bps), data);
      if (ll > best.loglik || (ll == best.loglik && bps < best.breakpoints)) {
        best.loglik = ll;
        best.breakpoints = bps;
      }
      return;
    }
    for (std::size_t i = from; i < cand.size(); ++i) {
      idx[depth] = i;
      rec(depth + 1, i + 1);
    }
  };
  rec(0, 0);
  return best;
}

}  // namespace pwexp::testing
