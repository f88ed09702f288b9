#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace pwexp;
namespace pt = pwexp::testing;

namespace {

FitConfig config(std::size_t nbreak, std::uint64_t seed = 1) {
  FitConfig c;
  c.nbreak = nbreak;
  c.seed = seed;
  return c;
}

void expect_identities(const FitResult& f) {
  const double k = static_cast<double>(f.n_param);
  EXPECT_EQ(f.n_param, 2 * f.model.breakpoints().size() + 1);
  EXPECT_DOUBLE_EQ(f.aic, -2.0 * f.loglik + 2.0 * k);
  EXPECT_DOUBLE_EQ(f.bic, -2.0 * f.loglik + k * std::log(static_cast<double>(f.n_obs)));
}

std::size_t tail_events(const FitResult& f, const SurvSample& d) {
  const auto t = tally(f.model.breakpoints(), d);
  return t.events.back();
}

}  // namespace

TEST(Loglik, HandValues) {
  const auto d = SurvSample::from_vectors({1, 2, 3}, {1, 1, 1});
  EXPECT_NEAR(loglik(PweModel::exponential(0.5), d), 3 * std::log(0.5) - 3.0, 1e-12);
  EXPECT_NEAR(loglik(PweModel::exponential(0.5), d), -5.07944, 1e-5);
  auto with_zero = d;
  with_zero.records.push_back({0.0, 0, {}, {}, CensorReason::none});
  EXPECT_EQ(loglik(PweModel::exponential(0.5), with_zero), loglik(PweModel::exponential(0.5), d));
}

TEST(Mle, HandExample) {
  const auto d = SurvSample::from_vectors({1, 2, 3, 4}, {1, 1, 1, 1});
  const auto f = mle_given_breakpoints({2.5}, d);
  EXPECT_NEAR(f.model.rates()[0], 0.25, 1e-15);
  EXPECT_NEAR(f.model.rates()[1], 1.0, 1e-15);
  const auto num = pt::numeric_rate_mle({2.5}, d);
  EXPECT_NEAR(num[0], 0.25, 1e-7);
  EXPECT_NEAR(num[1], 1.0, 1e-6);
  const auto e = mle_given_breakpoints({}, d);
  EXPECT_DOUBLE_EQ(e.model.rates()[0], 4.0 / 10.0);
}

TEST(Mle, MatchesNumericMaximization) {
  Stream rng(101);
  for (int rep = 0; rep < 25; ++rep) {
    const auto c = pt::random_small_case(rng);
    const auto f = mle_given_breakpoints(c.breakpoints, c.data);
    const auto num = pt::numeric_rate_mle(c.breakpoints, c.data);
    for (std::size_t k = 0; k < num.size(); ++k)
      EXPECT_NEAR(f.model.rates()[k] / num[k], 1.0, 1e-6) << "piece " << k;
    EXPECT_LT(pt::max_scaled_score(f.model, c.data), 1e-6);
    expect_identities(f);
  }
}

TEST(Mle, PieceIdentity) {
  Stream rng(102);
  for (int rep = 0; rep < 25; ++rep) {
    const auto c = pt::random_small_case(rng);
    const auto f = mle_given_breakpoints(c.breakpoints, c.data);
    const auto t = tally(c.breakpoints, c.data);
    std::size_t total = 0;
    for (std::size_t k = 0; k < t.events.size(); ++k) {
      EXPECT_NEAR(f.model.rates()[k] * t.exposure[k], static_cast<double>(t.events[k]),
                  1e-12 * static_cast<double>(t.events[k]));
      total += t.events[k];
    }
    EXPECT_EQ(total, c.data.event_count());
  }
}

TEST(Mle, EmptyPieceNamesThePiece) {
  const auto d = SurvSample::from_vectors({1, 2, 3, 10}, {1, 1, 1, 0});
  try {
    mle_given_breakpoints({5.0}, d);
    FAIL() << "expected EmptyPieceError";
  } catch (const EmptyPieceError& e) {
    EXPECT_EQ(e.piece(), 1u);
  }
}

TEST(ValidateBreakpoints, Examples) {
  const auto d = SurvSample::from_vectors({1, 2, 3}, {1, 1, 1});
  auto v = validate_breakpoints({0.1}, d);
  EXPECT_TRUE(v.breakpoints.empty());
  EXPECT_EQ(v.warnings.size(), 1u);

  const auto d2 = SurvSample::from_vectors({1, 1.3, 1.7, 2, 3}, {1, 1, 1, 1, 1});
  v = validate_breakpoints({1.4, 1.6}, d2);
  ASSERT_EQ(v.breakpoints.size(), 1u);
  EXPECT_DOUBLE_EQ(v.breakpoints[0], 1.5);
  EXPECT_EQ(v.warnings.size(), 1u);

  v = validate_breakpoints({1.5, 2.5}, d);
  EXPECT_EQ(v.breakpoints, (std::vector<double>{1.5, 2.5}));
  EXPECT_TRUE(v.warnings.empty());

  v = validate_breakpoints({3.5}, d);
  EXPECT_TRUE(v.breakpoints.empty());
}

TEST(ValidateBreakpoints, ResultAlwaysFeasible) {
  Stream rng(103);
  for (int rep = 0; rep < 200; ++rep) {
    const auto d = pt::random_sample(pt::random_model(rng), 5 + rng.index(20), 0.05, rng);
    if (d.event_count() == 0) continue;
    std::vector<double> b(1 + rng.index(5));
    for (auto& x : b) x = pt::uniform(rng, 0.0, 40.0);
    const auto v = validate_breakpoints(b, d);
    EXPECT_NO_THROW(mle_given_breakpoints(v.breakpoints, d));
  }
}

TEST(Bfs, MatchesIndependentEnumeration) {
  Stream rng(104);
  for (int rep = 0; rep < 30; ++rep) {
    const auto d = pt::random_sample(pt::random_model(rng), 20, 0.0, rng);
    for (std::size_t r : {1u, 2u}) {
      auto c = config(r);
      c.min_pt_tail = 1;
      const auto f = fit_bfs(d, c);
      const auto oracle = pt::enumerate_all(d, r, 1);
      EXPECT_TRUE(f.diagnostics.exhaustive);
      EXPECT_EQ(f.model.breakpoints(), oracle.breakpoints);
      EXPECT_NEAR(f.loglik, oracle.loglik, 1e-9 * std::abs(oracle.loglik));
    }
  }
}

TEST(Bfs, NoFeasibleModel) {
  const auto d = SurvSample::from_vectors({1, 2, 3, 4}, {1, 1, 1, 1});
  auto c = config(1);
  c.min_pt_tail = 10;
  EXPECT_THROW(fit_bfs(d, c), NoFeasibleModelError);
}

TEST(Bfs, DominatesTrueBreakpointsOnSubsample) {
  const auto trial = pt::scenario_trial(7);
  SurvSample sub;
  for (const auto& r : trial.train.records) {
    if (r.event == 1 && sub.event_count() >= 50) continue;
    sub.records.push_back(r);
    if (sub.event_count() >= 50 && sub.size() > 120) break;
  }
  auto c = config(2);
  c.max_set = 100000;
  const auto f = fit_bfs(sub, c);
  ASSERT_TRUE(f.diagnostics.exhaustive);
  const auto ev = sub.distinct_event_times();
  auto nearest = [&](double x) {
    return *std::min_element(ev.begin(), ev.end(),
                             [&](double a, double b) { return std::abs(a - x) < std::abs(b - x); });
  };
  const auto grid_point = mle_given_breakpoints({nearest(5.0), nearest(14.0)}, sub);
  EXPECT_GE(f.loglik, grid_point.loglik);
}

TEST(Bfs, SubsamplingCapsCombinations) {
  const auto trial = pt::scenario_trial(8);
  auto c = config(2);
  c.max_set = 500;
  const auto f = fit_bfs(trial.train, c);
  EXPECT_TRUE(f.diagnostics.subsampled);
  EXPECT_LE(f.diagnostics.combinations_evaluated, 500u);
  EXPECT_GE(tail_events(f, trial.train), c.min_pt_tail);
}

TEST(Bfs, NestingOverSearchedFamily) {
  Stream rng(105);
  for (int rep = 0; rep < 15; ++rep) {
    const auto d = pt::random_sample(pt::random_model(rng), 25, 0.02, rng);
    double prev = -kInf;
    for (std::size_t r = 0; r <= 3; ++r) {
      auto c = config(r);
      c.min_pt_tail = 1;
      c.max_set = 100000;
      double ll;
      try {
        ll = r == 0 ? fit_exponential(d).loglik : fit_bfs(d, c).loglik;
      } catch (const NoFeasibleModelError&) {
        break;
      }
      EXPECT_GE(ll, prev - 1e-9 * std::abs(prev));
      prev = ll;
    }
  }
}

TEST(Bfs, AffineEquivariance) {
  Stream rng(106);
  const auto d = pt::random_sample(PweModel({0.2, 0.05}, {4.0}), 40, 0.02, rng);
  auto c = config(2);
  c.min_pt_tail = 2;
  const auto f = fit_bfs(d, c);
  for (double scale : {2.5, 0.3, 4.0}) {
    const auto g = fit_bfs(d.scaled(scale), c);
    for (std::size_t k = 0; k < 2; ++k)
      EXPECT_NEAR(g.model.breakpoints()[k], scale * f.model.breakpoints()[k], 1e-12 * scale * 40);
    for (std::size_t k = 0; k < 3; ++k)
      EXPECT_NEAR(g.model.rates()[k] * scale / f.model.rates()[k], 1.0, 1e-10);
    EXPECT_NEAR(g.loglik, f.loglik - static_cast<double>(d.event_count()) * std::log(scale), 1e-9);
  }
}

TEST(Bfs, DeterministicAcrossThreads) {
  const auto trial = pt::scenario_trial(9);
  auto c = config(2, 77);
  c.max_set = 3000;
  const auto a = fit_bfs(trial.train, c);
  c.threads = 4;
  const auto b = fit_bfs(trial.train, c);
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.loglik, b.loglik);
}

TEST(Segmented, RecoversNoiselessBreakpoints) {
  const double d1 = 7.3;
  std::vector<double> x, y;
  for (int i = 1; i <= 80; ++i) {
    const double t = 0.25 * i;
    x.push_back(t);
    y.push_back(-0.12 * t + (0.12 - 0.03) * std::max(0.0, t - d1));
  }
  Stream rng(1);
  const auto fit = segmented_regression(x, y, {}, 1, x, rng);
  ASSERT_EQ(fit.free_breaks.size(), 1u);
  EXPECT_NEAR(fit.free_breaks[0], d1, 1e-6);
  EXPECT_FALSE(fit.fallback);

  // Two unknown change-points.
  y.clear();
  for (double t : x) y.push_back(-0.1 * t + 0.09 * std::max(0.0, t - 5.0) - 0.19 * std::max(0.0, t - 14.0));
  const auto fit2 = segmented_regression(x, y, {}, 2, x, rng);
  ASSERT_EQ(fit2.free_breaks.size(), 2u);
  EXPECT_NEAR(fit2.free_breaks[0], 5.0, 1e-6);
  EXPECT_NEAR(fit2.free_breaks[1], 14.0, 1e-6);
}

TEST(Ols, ZeroBreaksIsExponentialMle) {
  const auto trial = pt::scenario_trial(10);
  const auto f = fit_ols(trial.train, config(0));
  EXPECT_TRUE(f.model.breakpoints().empty());
  EXPECT_DOUBLE_EQ(f.model.rates()[0], fit_exponential(trial.train).model.rates()[0]);
}

TEST(Ols, FixedBreakpointRetained) {
  const auto trial = pt::scenario_trial(11);
  auto c = config(2);
  c.fixed_breakpoints = {14.0};
  for (auto opt : {Optimizer::ols, Optimizer::hybrid, Optimizer::bfs}) {
    c.optimizer = opt;
    const auto f = fit(trial.train, c);
    const auto& b = f.model.breakpoints();
    ASSERT_EQ(b.size(), 2u);
    EXPECT_TRUE(b[0] == 14.0 || b[1] == 14.0) << to_string(opt);
  }
}

TEST(Hybrid, NotWorseThanSnappedOls) {
  Stream rng(107);
  int compared = 0;
  for (int rep = 0; rep < 30; ++rep) {
    const auto d = pt::random_sample(pt::random_model(rng, 2), 60 + rng.index(100), 0.02, rng);
    auto c = config(2, rng.bits());
    c.min_pt_tail = 2;
    FitResult h;
    try {
      h = fit_hybrid(d, c);
    } catch (const NoFeasibleModelError&) {
      continue;
    }
    const auto ev = d.distinct_event_times();
    std::vector<double> snapped;
    for (double p : h.diagnostics.ols_breakpoints) {
      snapped.push_back(*std::min_element(ev.begin(), ev.end(), [&](double a, double b) {
        const double da = std::abs(a - p), db = std::abs(b - p);
        return da < db || (da == db && a < b);
      }));
    }
    std::sort(snapped.begin(), snapped.end());
    detail::ProfileEvaluator eval(d, c.min_pt_tail, c.exclude_int);
    const double ll = eval.evaluate(snapped);
    if (std::isnan(ll)) continue;
    ++compared;
    EXPECT_GE(h.loglik, ll - 1e-9 * std::abs(ll));
  }
  EXPECT_GT(compared, 15);
}

TEST(Hybrid, MatchesExhaustiveWhenWindowsCoverAllEvents) {
  Stream rng(108);
  int covered = 0;
  for (int rep = 0; rep < 60; ++rep) {
    const auto d = pt::random_sample(pt::random_model(rng, 2), 12, 0.0, rng);
    auto c = config(1, rng.bits());
    c.min_pt_tail = 1;
    FitResult h;
    try {
      h = fit_hybrid(d, c);
    } catch (const NoFeasibleModelError&) {
      continue;
    }
    if (h.diagnostics.candidate_set_sizes[0] != d.distinct_event_times().size()) continue;
    ++covered;
    EXPECT_EQ(h.loglik, fit_bfs(d, c).loglik);
  }
  EXPECT_GT(covered, 0);
}

TEST(Hybrid, RespectsExcludeInterval) {
  const auto trial = pt::scenario_trial(12);
  auto c = config(2);
  c.exclude_int = ExcludeInterval{23.0, kInf};
  for (auto opt : {Optimizer::hybrid, Optimizer::bfs}) {
    c.optimizer = opt;
    const auto f = fit(trial.train, c);
    for (double b : f.model.breakpoints()) EXPECT_LT(b, 23.0);
  }
  c.exclude_int = ExcludeInterval{3.0, 7.0};
  c.optimizer = Optimizer::hybrid;
  const auto f = fit(trial.train, c);
  for (double b : f.model.breakpoints()) EXPECT_FALSE(b >= 3.0 && b < 7.0);
}

TEST(Hybrid, RespectsMinPointsInTail) {
  const auto trial = pt::scenario_trial(13);
  for (std::size_t tail : {5u, 40u, 120u}) {
    auto c = config(2);
    c.min_pt_tail = tail;
    for (auto opt : {Optimizer::hybrid, Optimizer::bfs}) {
      c.optimizer = opt;
      const auto f = fit(trial.train, c);
      EXPECT_GE(tail_events(f, trial.train), tail);
    }
  }
}

TEST(Hybrid, RecoversScenarioBreakpoints) {
  const auto trial = pt::scenario_trial(14);
  const auto f = fit(trial.train, config(2));
  ASSERT_EQ(f.model.breakpoints().size(), 2u);
  EXPECT_NEAR(f.model.breakpoints()[0], 5.0, 1.5);
  EXPECT_NEAR(f.model.breakpoints()[1], 14.0, 1.5);
  EXPECT_EQ(f.optimizer, "hybrid");
  expect_identities(f);
}

TEST(Fit, Dispatch) {
  const auto trial = pt::scenario_trial(15);
  const auto e = fit(trial.train, config(0));
  EXPECT_EQ(e.optimizer, "exponential");
  double tot = 0.0;
  for (const auto& r : trial.train.records) tot += r.time;
  EXPECT_NEAR(e.model.rates()[0], static_cast<double>(trial.train.event_count()) / tot, 1e-15);

  auto c = config(2);
  c.fixed_breakpoints = {5.0, 14.0};
  const auto f = fit(trial.train, c);
  EXPECT_EQ(f.optimizer, "fixed");
  EXPECT_EQ(f.model.breakpoints(), (std::vector<double>{5.0, 14.0}));
  EXPECT_EQ(f.model, mle_given_breakpoints({5.0, 14.0}, trial.train).model);
}

TEST(Fit, InformationCriteria) {
  const auto trial = pt::scenario_trial(16);
  for (std::size_t r = 0; r <= 3; ++r) {
    const auto f = fit(trial.train, config(r));
    expect_identities(f);
    EXPECT_EQ(f.n_obs, trial.train.size());
    EXPECT_NEAR(f.bic - f.aic,
                static_cast<double>(2 * r + 1) * (std::log(static_cast<double>(f.n_obs)) - 2.0), 1e-9);
  }
}

TEST(Fit, ConfigValidation) {
  auto c = config(1);
  c.fixed_breakpoints = {1.0, 2.0};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = config(1);
  c.max_set = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_THROW(fit(SurvSample{}, config(1)), std::invalid_argument);
  EXPECT_THROW(fit(SurvSample::from_vectors({1, 2}, {0, 0}), config(0)), std::invalid_argument);
  EXPECT_EQ(parse_optimizer("mle"), Optimizer::bfs);
  EXPECT_THROW(parse_optimizer("nelder-mead"), std::invalid_argument);
}
