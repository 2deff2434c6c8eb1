#pragma once

#include <algorithm>

#include "fedsac/core/error.hpp"
#include "fedsac/ev/battery.hpp"

namespace fedsac::env {

struct RewardWeights {
  double lambda_p = 9.0;
  double lambda_a = 1.0;
  double lambda_g = 100.0;
  double kappa_ta = 36.0;
  double kappa_ra = 16.0;

  void validate() const {
    for (double w : {lambda_p, lambda_a, lambda_g, kappa_ta, kappa_ra}) {
      if (!(w >= 0.0)) throw RangeError("reward weights must be nonnegative");
    }
  }
};

/// Cost of energy at price xi for rate a (negative when buying).
inline double power_reward(double xi, double a) { return -xi * a; }

/// Penalty for lagging the driver's expected SoC once anxiety has set in.
inline double time_anxiety_reward(int t, double soc, const ev::EVSession& s,
                                  const ev::EVParams& p) {
  if (t < s.t_x || t >= s.t_d) return 0.0;
  const double lag = std::max(ev::anxiety_soc(t, s, p) - soc, 0.0);
  return -lag * lag;
}

/// Penalty for leaving below the target SoC.
inline double range_anxiety_reward(double soc_at_departure, double soc_d) {
  const double short_by = std::max(soc_d - soc_at_departure, 0.0);
  return -short_by * short_by;
}

inline double anxiety_reward(double r_ta, double r_ra, const RewardWeights& w) {
  return w.kappa_ta * r_ta + w.kappa_ra * r_ra;
}

/// Penalty for adding to the load the other EVs put on the substation:
/// charging is charged for a positive residual g_t − g_i, discharging for a
/// negative one.
inline double grid_reward(double a, double g_t, double g_i) {
  const double others = g_t - g_i;
  if (a > 0.0) return -std::max(others, 0.0);
  if (a < 0.0) return std::min(others, 0.0);
  return 0.0;
}

inline double sum_reward(double r_p, double r_a, double r_g, const RewardWeights& w) {
  return w.lambda_p * r_p + w.lambda_a * r_a + w.lambda_g * r_g;
}

}  // namespace fedsac::env
