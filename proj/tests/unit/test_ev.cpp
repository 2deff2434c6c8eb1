#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "fedsac/core/random.hpp"
#include "fedsac/ev/battery.hpp"
#include "fedsac/ev/habits.hpp"

using namespace fedsac;
using namespace fedsac::ev;

namespace {

DayPlan sample_plan() {
  DayPlan plan;
  plan.home_departure = 3;
  plan.office_arrival = 4;
  plan.office_departure = 13;
  plan.home_arrival = 14;
  plan.office = EVSession{4, 6, 13, 0.2, 0.9, Location::office};
  plan.home = EVSession{14, 16, 24, 0.3, 0.9, Location::home};
  return plan;
}

}  // namespace

TEST(SocStep, Branches) {
  const DayPlan plan = sample_plan();
  EXPECT_EQ(soc_step(0.5, 0.3, 5, plan, 0.05), 0.8);
  EXPECT_EQ(soc_step(0.5, 0.3, 0, plan, 0.05), 0.5);   // parked before leaving home
  EXPECT_EQ(soc_step(0.5, -0.2, 2, plan, 0.05), 0.5);
  EXPECT_EQ(soc_step(0.04, 0.7, 3, plan, 0.05), 0.0);  // driving, floored
  EXPECT_NEAR(soc_step(0.5, 0.0, 13, plan, 0.05), 0.45, 1e-15);
  EXPECT_EQ(soc_step(0.9, 0.5, 20, plan, 0.05), 1.0);  // clamp
}

TEST(SocStep, AlwaysInUnitInterval) {
  Rng rng = make_rng(3, "soc-fuzz");
  const DayPlan plan = sample_plan();
  for (int i = 0; i < 100000; ++i) {
    const double soc = uniform(rng, 0.0, 1.0);
    const double a = uniform(rng, -1.5, 1.5);
    const int t = uniform_int(rng, 0, 23);
    const double out = soc_step(soc, a, t, plan, uniform(rng, 0.0, 1.0));
    ASSERT_GE(out, 0.0);
    ASSERT_LE(out, 1.0);
  }
}

TEST(RateToPower, HandValues) {
  EVParams p;
  EXPECT_EQ(rate_to_power(0.0, p), 0.0);
  EXPECT_NEAR(rate_to_power(0.5, p), 0.5 * 0.03 / 0.98, 1e-12);
  EXPECT_NEAR(rate_to_power(0.5, p), 0.015306122448979593, 1e-12);
  EXPECT_NEAR(rate_to_power(-0.2, p), -0.00588, 1e-12);
  EXPECT_THROW(rate_to_power(1.01, p), RangeError);
  EXPECT_THROW(rate_to_power(-0.21, p), RangeError);
}

TEST(RateToPower, WithinPowerBounds) {
  EVParams p;
  EXPECT_NEAR(p.p_max_g2v(), 0.03 / 0.98, 1e-15);
  EXPECT_NEAR(p.p_max_v2g(), 0.98 * 0.2 * 0.03, 1e-15);
  Rng rng = make_rng(4, "power-bounds");
  for (int i = 0; i < 10000; ++i) {
    const double a = uniform(rng, -p.a_max_v2g, p.a_max_g2v);
    const double pw = rate_to_power(a, p);
    if (a > 0) {
      ASSERT_LE(pw, p.p_max_g2v() + 1e-15);
    } else {
      ASSERT_LE(-pw, p.p_max_v2g() + 1e-15);
    }
  }
}

TEST(RateToPower, RoundTripNeverExportsEnergy) {
  Rng rng = make_rng(5, "round-trip");
  for (int i = 0; i < 10000; ++i) {
    EVParams p;
    p.eta_c = uniform(rng, 0.5, 1.0);
    p.eta_d = uniform(rng, 0.5, 1.0);
    const double a = uniform(rng, 0.0, p.a_max_v2g);
    ASSERT_GE(rate_to_power(a, p) + rate_to_power(-a, p), 0.0);
  }
}

TEST(AggregatePower, Sums) {
  EXPECT_EQ(aggregate_power(std::vector<double>{}), 0.0);
  EXPECT_NEAR(aggregate_power(std::vector<double>{0.01, -0.004}), 0.006, 1e-15);
  std::vector<double> thirty(30, 0.0306);
  EXPECT_NEAR(aggregate_power(thirty), 0.918, 1e-12);
}

TEST(AnxietySoc, HandValues) {
  EVParams p;
  p.beta1 = 0.9;
  p.beta2 = 9.0;
  EVSession s{10, 12, 20, 0.2, 0.9, Location::home};
  EXPECT_EQ(anxiety_soc(10, s, p), 0.0);
  EXPECT_NEAR(anxiety_soc(20, s, p), 0.9, 1e-12);
  const double mid = 0.9 * (std::exp(-4.5) - 1.0) / (std::exp(-9.0) - 1.0);
  EXPECT_NEAR(anxiety_soc(15, s, p), mid, 1e-12);
  EXPECT_NEAR(anxiety_soc(15, s, p), 0.890112, 1e-6);
  EVSession empty{10, 10, 10, 0.2, 0.9, Location::home};
  EXPECT_THROW(anxiety_soc(10, empty, p), DomainError);
}

TEST(AnxietySoc, MonotoneInTime) {
  Rng rng = make_rng(6, "anxiety-monotone");
  for (int trial = 0; trial < 50; ++trial) {
    EVParams p;
    p.beta1 = uniform(rng, 0.01, 1.0);
    p.beta2 = uniform(rng, 0.1, 15.0);
    EVSession s{0, 1, uniform_int(rng, 1, 24), 0.0, p.beta1, Location::home};
    double last = -1.0;
    for (int k = 0; k <= 100; ++k) {
      const double t = s.t_d * k / 100.0;
      const double v = anxiety_soc(t, s, p);
      ASSERT_GE(v, last);
      last = v;
    }
  }
}

TEST(EVParams, Validation) {
  EVParams p;
  EXPECT_NO_THROW(p.validate());
  p.eta_c = 1.2;
  EXPECT_THROW(p.validate(), RangeError);
  p = EVParams{};
  p.beta2 = 0.0;
  EXPECT_THROW(p.validate(), RangeError);
  p = EVParams{};
  p.beta1 = 1.5;
  EXPECT_THROW(p.validate(), RangeError);
}

TEST(SampleDay, OrderedWithinFrame) {
  const HabitModel m = HabitModel::standard();
  for (int kind = 1; kind <= 3; ++kind) {
    for (std::uint64_t seed = 0; seed < 2000; ++seed) {
      const DayPlan d = sample_day(m, kind, seed);
      ASSERT_GE(d.home_departure, 0);
      ASSERT_LT(d.home_departure, d.office_arrival);
      ASSERT_LT(d.office_arrival, d.office_departure);
      ASSERT_LT(d.office_departure, d.home_arrival);
      ASSERT_LT(d.home_arrival, 24);
      for (const EVSession* s : {&d.office, &d.home}) {
        ASSERT_NO_THROW(s->validate());
        const auto& h = m.kind(kind);
        const int delay = s->t_x - s->t_a;
        ASSERT_LE(delay, static_cast<int>(std::lround(h.delay_max)));
        ASSERT_GE(s->soc_d, h.beta1_min);
        ASSERT_LE(s->soc_d, h.beta1_max);
      }
      ASSERT_EQ(d.office.t_a, d.office_arrival);
      ASSERT_EQ(d.office.t_d, d.office_departure);
      ASSERT_EQ(d.home.t_a, d.home_arrival);
      ASSERT_EQ(d.home.t_d, 24);
    }
  }
}

TEST(SampleDay, KindOneWithinTruncation) {
  const HabitModel m = HabitModel::standard();
  const DayPlan d = sample_day(m, 1, 42);
  EXPECT_GE(d.home_departure, static_cast<int>(m.frame(5.0)));
  EXPECT_LE(d.home_departure, static_cast<int>(m.frame(10.0)));
  EXPECT_LT(d.office_departure, d.home_arrival);
}

TEST(SampleDay, KindTwoTargetRange) {
  const HabitModel m = HabitModel::standard();
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const DayPlan d = sample_day(m, 2, seed);
    ASSERT_GE(d.office.soc_d, 0.85);
    ASSERT_LE(d.office.soc_d, 0.9);
  }
}

TEST(SampleDay, Deterministic) {
  const HabitModel m = HabitModel::standard();
  const DayPlan a = sample_day(m, 3, 77), b = sample_day(m, 3, 77);
  EXPECT_EQ(a.home_departure, b.home_departure);
  EXPECT_EQ(a.home.t_x, b.home.t_x);
  EXPECT_EQ(a.office.soc_d, b.office.soc_d);
}

TEST(SampleKind, MixtureThreeOneOne) {
  const HabitModel m = HabitModel::standard();
  Rng rng = make_rng(8, "kinds");
  std::vector<int> counts(4, 0);
  const int n = 10000;
  for (int i = 0; i < n; ++i) ++counts[sample_kind(m, rng)];
  EXPECT_NEAR(counts[1] / double(n), 0.6, 0.02);
  EXPECT_NEAR(counts[2] / double(n), 0.2, 0.02);
  EXPECT_NEAR(counts[3] / double(n), 0.2, 0.02);
}

TEST(SampleBeta2, TruncatedRange) {
  const HabitModel m = HabitModel::standard();
  Rng rng = make_rng(9, "beta2");
  double sum = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double b = sample_beta2(m, rng);
    ASSERT_GE(b, 6.0);
    ASSERT_LE(b, 12.0);
    sum += b;
  }
  EXPECT_NEAR(sum / 10000, 9.0, 0.05);
}

TEST(HabitModel, ValidationCatchesOverlap) {
  HabitModel m = HabitModel::standard();
  EXPECT_NO_THROW(m.validate());
  m.kinds[0].office_departure.min = 9.0;
  m.kinds[0].office_departure.mean = 10.0;
  EXPECT_THROW(m.validate(), RangeError);
  m = HabitModel::standard();
  m.beta2_min = -1.0;
  EXPECT_THROW(m.validate(), RangeError);
}
