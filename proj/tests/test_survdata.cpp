#include <gtest/gtest.h>

#include "support.hpp"

using namespace pwexp;

namespace {

SurvRecord calendar(double rand, double follow_abs, int event, CensorReason reason = CensorReason::none) {
  return {follow_abs - rand, event, rand, follow_abs, reason};
}

}  // namespace

TEST(KaplanMeier, HandExample) {
  const auto km = km_fit(SurvSample::from_vectors({1, 2, 3}, {1, 0, 1}));
  ASSERT_EQ(km.steps.size(), 2u);
  EXPECT_DOUBLE_EQ(km.steps[0].survival, 2.0 / 3.0);
  EXPECT_EQ(km.steps[1].time, 3.0);
  EXPECT_DOUBLE_EQ(km.steps[1].survival, 0.0);
  EXPECT_DOUBLE_EQ(km(2.5), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(km(0.5), 1.0);
}

TEST(KaplanMeier, UncensoredIsEmpiricalSurvival) {
  Stream rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 5 + rng.index(50);
    std::vector<double> t(n);
    for (auto& x : t) x = rng.uniform() * 10.0;
    const auto km = km_fit(SurvSample::from_vectors(t, std::vector<int>(n, 1)));
    std::sort(t.begin(), t.end());
    ASSERT_EQ(km.steps.size(), n);
    for (std::size_t k = 0; k < n; ++k) {
      EXPECT_EQ(km.steps[k].time, t[k]);
      EXPECT_NEAR(km.steps[k].survival, static_cast<double>(n - k - 1) / static_cast<double>(n), 1e-12);
    }
  }
}

TEST(KaplanMeier, AllCensoredIsFlat) {
  const auto km = km_fit(SurvSample::from_vectors({1, 2, 3}, {0, 0, 0}));
  EXPECT_TRUE(km.steps.empty());
  EXPECT_EQ(km(10.0), 1.0);
}

TEST(KaplanMeier, EventsBeforeCensoringAtTies) {
  const auto km = km_fit(SurvSample::from_vectors({1, 1, 2}, {1, 0, 1}));
  ASSERT_EQ(km.steps.size(), 2u);
  EXPECT_EQ(km.steps[0].at_risk, 3u);
  EXPECT_DOUBLE_EQ(km.steps[0].survival, 2.0 / 3.0);
  EXPECT_EQ(km.steps[1].at_risk, 1u);
}

TEST(KaplanMeier, CurveInvariants) {
  Stream rng(8);
  for (int rep = 0; rep < 30; ++rep) {
    const auto m = pwexp::testing::random_model(rng);
    const auto km = km_fit(pwexp::testing::random_sample(m, 200, 0.02, rng));
    double prev = 1.0, prev_t = -1.0;
    for (const auto& s : km.steps) {
      EXPECT_LE(s.survival, prev);
      EXPECT_GE(s.survival, 0.0);
      EXPECT_GT(s.time, prev_t);
      prev = s.survival;
      prev_t = s.time;
    }
  }
}

TEST(KaplanMeier, EmptyDataThrows) { EXPECT_THROW(km_fit(SurvSample{}), std::invalid_argument); }

TEST(CutData, WorkedRows) {
  SurvSample s;
  s.records = {calendar(18.95190, 19.92601, 1), calendar(38.76302, 38.76302 + 14.3753607, 1),
               calendar(41.0, 45.0, 1)};
  const double cut = 39.99107;
  const auto c = cut_data(s, cut);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.records[0].event, 1);
  EXPECT_DOUBLE_EQ(c.records[0].time, s.records[0].time);
  EXPECT_EQ(c.records[0].reason, CensorReason::none);
  EXPECT_EQ(c.records[1].event, 0);
  // The printed randomization time carries five decimals.
  EXPECT_NEAR(c.records[1].time, 1.2280545, 1e-5);
  EXPECT_EQ(c.records[1].reason, CensorReason::cut);
  EXPECT_EQ(*c.records[1].follow_abs_time, cut);
}

TEST(CutData, DropOutBeforeCutUnchanged) {
  SurvSample s;
  s.records = {calendar(18.38245, 19.71915, 0, CensorReason::drop_out)};
  const auto c = cut_data(s, 39.99107);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c.records[0].reason, CensorReason::drop_out);
}

TEST(CutData, IdempotentAndBounded) {
  Stream rng(17);
  for (int rep = 0; rep < 10; ++rep) {
    const auto trial = simulate_trial(pwexp::testing::scenario_design(), rng.bits());
    const auto s = to_sample(trial);
    const double cut = 10.0 + 40.0 * rng.uniform();
    const auto once = cut_data(s, cut);
    const auto twice = cut_data(once, cut);
    ASSERT_EQ(once.size(), twice.size());
    for (std::size_t i = 0; i < once.size(); ++i) {
      EXPECT_EQ(once.records[i].time, twice.records[i].time);
      EXPECT_EQ(once.records[i].event, twice.records[i].event);
      EXPECT_EQ(once.records[i].reason, twice.records[i].reason);
      EXPECT_EQ(*once.records[i].follow_abs_time, *twice.records[i].follow_abs_time);
      EXPECT_LE(*once.records[i].follow_abs_time, cut);
      EXPECT_LE(*once.records[i].rand_time, cut);
    }
  }
}

TEST(CutData, NeedsCalendarFields) {
  EXPECT_THROW(cut_data(SurvSample::from_vectors({1.0}, {1}), 5.0), std::invalid_argument);
  SurvSample s;
  s.records = {calendar(1.0, 2.0, 1)};
  EXPECT_THROW(cut_data(s, 0.0), std::invalid_argument);
}

TEST(CensorReason, ParsesMissingAsNone) {
  for (const char* s : {"", "NA", "<NA>", "none"}) EXPECT_EQ(parse_censor_reason(s), CensorReason::none);
  for (auto r : {CensorReason::none, CensorReason::drop_out, CensorReason::death,
                 CensorReason::never_event, CensorReason::cut})
    EXPECT_EQ(parse_censor_reason(to_string(r)), r);
  EXPECT_THROW(parse_censor_reason("lost"), std::invalid_argument);
}
