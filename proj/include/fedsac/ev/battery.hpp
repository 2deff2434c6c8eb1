#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>

#include "fedsac/core/error.hpp"

/// EV battery, power conversion and the driver-anxiety curve.
///
/// Rates `a` are per-slot SoC deltas (one slot = one hour); positive charges
/// the battery (G2V), negative discharges it (V2G). Powers are per-unit grid
/// consumption: charging draws a·C/η_c, discharging delivers η_d·|a|·C.
namespace fedsac::ev {

struct EVParams {
  double capacity = 0.03;  ///< C, per-unit energy
  double eta_c = 0.98;
  double eta_d = 0.98;
  double a_max_g2v = 1.0;
  double a_max_v2g = 0.2;
  int bus = 1;
  double beta1 = 0.9;  ///< target departure SoC
  double beta2 = 9.0;  ///< anxiety curve shape
  int kind = 1;

  double p_max_g2v() const { return a_max_g2v * capacity / eta_c; }
  double p_max_v2g() const { return eta_d * a_max_v2g * capacity; }

  void validate() const {
    if (!(capacity > 0.0)) throw RangeError("EVParams: capacity must be positive");
    if (!(eta_c > 0.0 && eta_c <= 1.0) || !(eta_d > 0.0 && eta_d <= 1.0)) {
      throw RangeError("EVParams: efficiencies must lie in (0, 1]");
    }
    if (!(a_max_g2v > 0.0) || !(a_max_v2g > 0.0)) {
      throw RangeError("EVParams: rate limits must be positive");
    }
    if (!(beta1 >= 0.0 && beta1 <= 1.0)) throw RangeError("EVParams: beta1 must lie in [0, 1]");
    if (beta2 == 0.0 || !std::isfinite(beta2)) throw RangeError("EVParams: beta2 must be nonzero");
    if (kind < 1 || kind > 3) throw RangeError("EVParams: kind must be 1, 2 or 3");
  }
};

enum class Location { home, office };

inline const char* to_string(Location l) { return l == Location::home ? "home" : "office"; }

/// One plug-in session: plugged for slots t_a ≤ t < t_d.
struct EVSession {
  int t_a = 0;
  int t_x = 0;  ///< anxiety onset
  int t_d = 1;
  double soc_init = 0.0;
  double soc_d = 0.9;
  Location location = Location::home;

  bool plugged(int t) const { return t >= t_a && t < t_d; }

  void validate() const {
    if (!(t_a <= t_x && t_x < t_d)) {
      throw RangeError("EVSession: need t_a <= t_x < t_d");
    }
    if (!(soc_init >= 0.0 && soc_init <= 1.0) || !(soc_d >= 0.0 && soc_d <= 1.0)) {
      throw RangeError("EVSession: SoC values must lie in [0, 1]");
    }
  }
};

/// One EV's day in frame hours [0, 24): parked unplugged until it leaves
/// home, drives to the office, charges there, drives home and charges there
/// until the end of the frame.
struct DayPlan {
  int home_departure = 4;
  int office_arrival = 5;
  int office_departure = 13;
  int home_arrival = 14;
  EVSession office;
  EVSession home;

  enum class Activity { idle, driving, plugged };

  Activity activity(int t) const {
    if (office.plugged(t) || home.plugged(t)) return Activity::plugged;
    if ((t >= home_departure && t < office_arrival) || (t >= office_departure && t < home_arrival)) {
      return Activity::driving;
    }
    return Activity::idle;
  }

  /// Session covering slot t, or nullptr when unplugged.
  const EVSession* session_at(int t) const {
    if (office.plugged(t)) return &office;
    if (home.plugged(t)) return &home;
    return nullptr;
  }
};

/// SoC after slot t: rate applied while plugged, drain while driving,
/// unchanged otherwise. Always within [0, 1].
inline double soc_step(double soc, double a, int t, const DayPlan& plan, double driving_drain) {
  switch (plan.activity(t)) {
    case DayPlan::Activity::plugged:
      return std::clamp(soc + a, 0.0, 1.0);
    case DayPlan::Activity::driving:
      return std::max(soc - driving_drain, 0.0);
    case DayPlan::Activity::idle:
      break;
  }
  return soc;
}

/// Grid power drawn for rate a.
inline double rate_to_power(double a, const EVParams& p) {
  constexpr double slack = 1e-12;
  if (!(a >= -p.a_max_v2g - slack && a <= p.a_max_g2v + slack)) {
    throw RangeError("rate_to_power: rate " + std::to_string(a) + " outside [" +
                     std::to_string(-p.a_max_v2g) + ", " + std::to_string(p.a_max_g2v) + "]");
  }
  return a > 0.0 ? a * p.capacity / p.eta_c : p.eta_d * a * p.capacity;
}

/// Power of an aggregator: the sum of its EVs' powers.
inline double aggregate_power(std::span<const double> ev_powers) {
  double sum = 0.0;
  for (double p : ev_powers) sum += p;
  return sum;
}

/// Driver's expected SoC at hour t of a session:
/// β¹ (e^{−β²(t−t_a)/(t_d−t_a)} − 1) / (e^{−β²} − 1).
inline double anxiety_soc(double t, const EVSession& s, const EVParams& p) {
  if (s.t_d == s.t_a) throw DomainError("anxiety_soc: empty session (t_d = t_a)");
  if (p.beta2 == 0.0) throw DomainError("anxiety_soc: beta2 must be nonzero");
  const double frac = (t - s.t_a) / static_cast<double>(s.t_d - s.t_a);
  return p.beta1 * std::expm1(-p.beta2 * frac) / std::expm1(-p.beta2);
}

}  // namespace fedsac::ev
