#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include "fedsac/core/error.hpp"
#include "fedsac/core/random.hpp"
#include "fedsac/ev/battery.hpp"

namespace fedsac::ev {

/// Truncated normal in clock hours.
struct TimeDist {
  double mean = 0.0;
  double std = 1.0;
  double min = 0.0;
  double max = 24.0;

  double sample(Rng& rng) const { return truncated_normal(rng, mean, std, min, max); }
};

/// Travel and charging habits of one driver kind, in clock hours.
struct KindHabits {
  TimeDist home_departure{7.5, 1.0, 5.0, 10.0};
  double commute_min = 0.5, commute_max = 1.5;
  TimeDist office_departure{17.5, 1.0, 15.0, 20.0};
  double delay_min = 1.0, delay_max = 4.0;  ///< anxiety onset t_x − t_a, hours
  double beta1_min = 0.85, beta1_max = 0.95;
  double weight = 3.0;  ///< relative frequency in the fleet
};

struct HabitModel {
  std::array<KindHabits, 3> kinds;
  int day_start_hour = 4;  ///< clock hour of frame hour 0
  double beta2_mean = 9.0, beta2_std = 1.0, beta2_min = 6.0, beta2_max = 12.0;

  /// Default three kinds: regular commuter, early leaver, late worker.
  static HabitModel standard() {
    HabitModel m;
    m.kinds[1].office_departure = {16.0, 1.0, 13.5, 18.5};
    m.kinds[1].delay_min = 1.0;
    m.kinds[1].delay_max = 2.0;
    m.kinds[1].beta1_min = 0.85;
    m.kinds[1].beta1_max = 0.9;
    m.kinds[1].weight = 1.0;
    m.kinds[2].office_departure = {19.0, 1.0, 16.5, 21.5};
    m.kinds[2].delay_min = 2.0;
    m.kinds[2].delay_max = 4.0;
    m.kinds[2].beta1_min = 0.9;
    m.kinds[2].beta1_max = 0.95;
    m.kinds[2].weight = 1.0;
    return m;
  }

  HabitModel() = default;

  const KindHabits& kind(int k) const {
    if (k < 1 || k > 3) throw RangeError("habit kind must be 1, 2 or 3");
    return kinds[static_cast<std::size_t>(k - 1)];
  }

  /// Frame hour of a clock time.
  double frame(double clock) const { return clock - day_start_hour; }

  void validate() const {
    double total = 0.0;
    for (int k = 1; k <= 3; ++k) {
      const auto& h = kind(k);
      const auto label = "habits.kind" + std::to_string(k);
      for (const TimeDist* d : {&h.home_departure, &h.office_departure}) {
        if (!(d->std > 0.0) || d->min > d->max || d->mean < d->min || d->mean > d->max) {
          throw RangeError(label + ": bad time distribution");
        }
      }
      if (!(h.commute_min > 0.0) || h.commute_min > h.commute_max) {
        throw RangeError(label + ": need 0 < commute_min <= commute_max");
      }
      // Slots must stay ordered and inside [0, 24) of the frame after rounding.
      if (frame(h.home_departure.min) < 0.5) {
        throw RangeError(label + ": home departure before the frame starts");
      }
      if (h.home_departure.max + h.commute_max + 1.0 > h.office_departure.min) {
        throw RangeError(label + ": office stay too short for the departure bounds");
      }
      if (frame(h.office_departure.max + h.commute_max) > 22.5) {
        throw RangeError(label + ": home arrival too late in the frame");
      }
      if (!(h.delay_min >= 0.0) || h.delay_min > h.delay_max) {
        throw RangeError(label + ": need 0 <= delay_min <= delay_max");
      }
      if (!(h.beta1_min >= 0.0 && h.beta1_min <= h.beta1_max && h.beta1_max <= 1.0)) {
        throw RangeError(label + ": need 0 <= beta1_min <= beta1_max <= 1");
      }
      if (!(h.weight >= 0.0)) throw RangeError(label + ": weight must be nonnegative");
      total += h.weight;
    }
    if (!(total > 0.0)) throw RangeError("habits: kind weights sum to zero");
    if (!(beta2_std > 0.0) || beta2_min > beta2_max || (beta2_min <= 0.0 && beta2_max >= 0.0)) {
      throw RangeError("habits: beta2 range must exclude zero");
    }
  }
};

/// Draws a driver kind (1..3) with the model's weights.
inline int sample_kind(const HabitModel& m, Rng& rng) {
  const double total = m.kinds[0].weight + m.kinds[1].weight + m.kinds[2].weight;
  double u = uniform(rng, 0.0, total);
  for (int k = 0; k < 2; ++k) {
    if (u < m.kinds[k].weight) return k + 1;
    u -= m.kinds[k].weight;
  }
  return 3;
}

inline double sample_beta2(const HabitModel& m, Rng& rng) {
  return truncated_normal(rng, m.beta2_mean, m.beta2_std, m.beta2_min, m.beta2_max);
}

/// One day of a driver of the given kind: office and home sessions plus the
/// driving windows, all in integer frame hours. The home session lasts until
/// the end of the frame. Both sessions share one target SoC β¹ for the day;
/// soc_init is left at 0 for the environment to fill on arrival.
inline DayPlan sample_day(const HabitModel& m, int kind, std::uint64_t seed) {
  const KindHabits& h = m.kind(kind);
  Rng rng(seed);
  DayPlan plan;
  const double dep = h.home_departure.sample(rng);
  const double arr = dep + uniform(rng, h.commute_min, h.commute_max);
  const double leave = h.office_departure.sample(rng);
  const double back = leave + uniform(rng, h.commute_min, h.commute_max);
  const double beta1 = uniform(rng, h.beta1_min, h.beta1_max);

  plan.home_departure = std::max(0, static_cast<int>(std::lround(m.frame(dep))));
  plan.office_arrival =
      std::max(plan.home_departure + 1, static_cast<int>(std::lround(m.frame(arr))));
  plan.office_departure =
      std::max(plan.office_arrival + 1, static_cast<int>(std::lround(m.frame(leave))));
  plan.home_arrival =
      std::max(plan.office_departure + 1, static_cast<int>(std::lround(m.frame(back))));
  plan.home_arrival = std::min(plan.home_arrival, 23);

  auto onset = [&](int t_a, int t_d) {
    const int delay = static_cast<int>(std::lround(uniform(rng, h.delay_min, h.delay_max)));
    return std::min(t_a + delay, t_d - 1);
  };
  plan.office = EVSession{plan.office_arrival, 0, plan.office_departure, 0.0, beta1,
                          Location::office};
  plan.office.t_x = onset(plan.office.t_a, plan.office.t_d);
  plan.home = EVSession{plan.home_arrival, 0, 24, 0.0, beta1, Location::home};
  plan.home.t_x = onset(plan.home.t_a, plan.home.t_d);
  return plan;
}

}  // namespace fedsac::ev
