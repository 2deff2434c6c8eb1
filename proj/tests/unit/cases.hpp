#pragma once

#include <cmath>
#include <vector>

#include "fedsac/rdn/network.hpp"

namespace testcases {

using fedsac::rdn::BusSpec;
using fedsac::rdn::LineSpec;
using fedsac::rdn::RadialNetwork;

inline RadialNetwork two_bus(double r = 0.01, double x = 0.01, double l_max = 1.0,
                             double p_load = 0.0, double q_load = 0.0) {
  return RadialNetwork({{0, 1.0, 1.0, 0.0, 0.0, false}, {1, 0.81, 1.21, p_load, q_load, true}},
                       {{0, 1, r, x, 0.0, l_max}});
}

/// Path 0 → 1 → … → n−1 with per-bus loads; every non-root bus has an aggregator.
inline RadialNetwork path(const std::vector<double>& r, const std::vector<double>& x,
                          const std::vector<double>& p_load, const std::vector<double>& q_load,
                          double l_max = 1.0) {
  const int n = static_cast<int>(r.size()) + 1;
  std::vector<BusSpec> buses{{0, 1.0, 1.0, 0.0, 0.0, false}};
  std::vector<LineSpec> lines;
  for (int k = 1; k < n; ++k) {
    buses.push_back({k, 0.81, 1.21, p_load[k - 1], q_load[k - 1], true});
    lines.push_back({k - 1, k, r[k - 1], x[k - 1], 0.0, l_max});
  }
  return RadialNetwork(buses, lines);
}

/// Smaller root of l = (L + r l)² + (q + x l)², the squared current of a
/// single line from a v = 1 source, found by bisection.
inline double two_bus_current(double load, double q, double r, double x) {
  auto f = [&](double l) {
    const double p = load + r * l;
    const double qq = q + x * l;
    return p * p + qq * qq - l;
  };
  // f is a convex parabola with f(0) ≥ 0; the physical root lies left of its vertex.
  double hi = (1.0 - 2.0 * (r * load + x * q)) / (2.0 * (r * r + x * x));
  double lo = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Exact power flow on a path by fixed-point iteration of the sweep equations.
struct PathFlow {
  std::vector<double> P, Q, l, v;
  double p0 = 0.0;
  double loss = 0.0;
};

inline PathFlow path_flow(const std::vector<double>& r, const std::vector<double>& x,
                          const std::vector<double>& p, const std::vector<double>& q) {
  const std::size_t n = r.size();
  PathFlow f;
  f.P.assign(n, 0.0);
  f.Q.assign(n, 0.0);
  f.l.assign(n, 0.0);
  f.v.assign(n + 1, 1.0);
  for (int it = 0; it < 500; ++it) {
    double tail_p = 0.0, tail_q = 0.0;
    for (std::size_t k = n; k-- > 0;) {
      f.P[k] = p[k] + tail_p + r[k] * f.l[k];
      f.Q[k] = q[k] + tail_q + x[k] * f.l[k];
      tail_p = f.P[k];
      tail_q = f.Q[k];
    }
    for (std::size_t k = 0; k < n; ++k) {
      f.v[k + 1] = f.v[k] - 2.0 * (r[k] * f.P[k] + x[k] * f.Q[k]) +
                   f.l[k] * (r[k] * r[k] + x[k] * x[k]);
    }
    for (std::size_t k = 0; k < n; ++k) {
      f.l[k] = (f.P[k] * f.P[k] + f.Q[k] * f.Q[k]) / f.v[k];
    }
  }
  f.p0 = n ? f.P[0] : 0.0;
  for (std::size_t k = 0; k < n; ++k) f.loss += r[k] * f.l[k];
  return f;
}

}  // namespace testcases
