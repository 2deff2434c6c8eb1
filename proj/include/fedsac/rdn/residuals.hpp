#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "fedsac/core/error.hpp"
#include "fedsac/rdn/network.hpp"

namespace fedsac::rdn {

/// Residuals of the branch-flow equations and slacks of the limits at a point.
/// Equality residuals are zero at a feasible point; slacks are nonnegative.
struct ResidualReport {
  // per line
  std::vector<double> active_balance;
  std::vector<double> reactive_balance;
  std::vector<double> voltage_drop;
  std::vector<double> current_definition;  ///< l·v_s − P² − Q²
  std::vector<double> capacity_sending;    ///< slack of the sending-end limit
  std::vector<double> capacity_receiving;  ///< slack of the receiving-end limit
  // per bus
  std::vector<double> voltage_lower;  ///< v − v_min
  std::vector<double> voltage_upper;  ///< v_max − v
  double substation_balance = 0.0;

  /// Largest |equality residual|. With `include_current_definition` false the
  /// current definition is left out, as for a cone-relaxed solution.
  double max_abs_residual(bool include_current_definition = true) const {
    double m = std::abs(substation_balance);
    auto fold = [&m](const std::vector<double>& xs) {
      for (double x : xs) {
        m = std::max(m, std::abs(x));
      }
    };
    fold(active_balance);
    fold(reactive_balance);
    fold(voltage_drop);
    if (include_current_definition) {
      fold(current_definition);
    }
    return m;
  }

  /// Smallest slack over all inequality limits (negative means violated).
  double min_slack() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto* xs : {&capacity_sending, &capacity_receiving, &voltage_lower, &voltage_upper}) {
      for (double x : *xs) {
        m = std::min(m, x);
      }
    }
    return m;
  }

  /// Smallest l·v − P² − Q²; nonnegative iff the cone relaxation holds.
  double min_current_definition() const {
    double m = std::numeric_limits<double>::infinity();
    for (double x : current_definition) {
      m = std::min(m, x);
    }
    return m;
  }
};

/// Evaluates every branch-flow relation at `fs`. `agg_loads` holds the
/// aggregator consumption per bus.
inline ResidualReport flow_residuals(const RadialNetwork& net, const FlowState& fs,
                                     std::span<const double> agg_loads) {
  const std::size_t nl = net.num_lines();
  const std::size_t nb = net.num_buses();
  if (fs.P.size() != nl || fs.Q.size() != nl || fs.l.size() != nl || fs.v.size() != nb ||
      agg_loads.size() != nb) {
    throw ShapeError("flow_residuals: flow state or load vector does not match network");
  }
  ResidualReport rep;
  rep.active_balance.resize(nl);
  rep.reactive_balance.resize(nl);
  rep.voltage_drop.resize(nl);
  rep.current_definition.resize(nl);
  rep.capacity_sending.resize(nl);
  rep.capacity_receiving.resize(nl);

  const auto& buses = net.buses();
  for (std::size_t j = 0; j < nl; ++j) {
    const auto& ln = net.lines()[j];
    const int s = ln.from_bus;
    const int e = ln.to_bus;
    double downstream_p = 0.0;
    double downstream_q = 0.0;
    for (int k : net.child_lines(e)) {
      downstream_p += fs.P[k];
      downstream_q += fs.Q[k];
    }
    const double P = fs.P[j];
    const double Q = fs.Q[j];
    const double l = fs.l[j];
    rep.active_balance[j] = P - ln.r * l - buses[e].p_load - agg_loads[e] - downstream_p;
    rep.reactive_balance[j] = Q - ln.x * l - buses[e].q_load - downstream_q;
    rep.voltage_drop[j] = fs.v[s] - fs.v[e] - 2.0 * (ln.r * P + ln.x * Q) +
                          l * (ln.r * ln.r + ln.x * ln.x);
    rep.current_definition[j] = l * fs.v[s] - P * P - Q * Q;
    const double b2 = ln.b * ln.b;
    rep.capacity_sending[j] = ln.l_max - (l + 0.25 * fs.v[s] * b2 + ln.b * Q);
    rep.capacity_receiving[j] = ln.l_max - (l + 0.25 * fs.v[e] * b2 + ln.b * (ln.x * l - Q));
  }

  rep.voltage_lower.resize(nb);
  rep.voltage_upper.resize(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    rep.voltage_lower[i] = fs.v[i] - buses[i].v_min;
    rep.voltage_upper[i] = buses[i].v_max - fs.v[i];
  }

  double feeder_out = 0.0;
  for (int k : net.child_lines(0)) {
    feeder_out += fs.P[k];
  }
  rep.substation_balance = fs.p0 - buses[0].p_load - agg_loads[0] - feeder_out;
  return rep;
}

}  // namespace fedsac::rdn
