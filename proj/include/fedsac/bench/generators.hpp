#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <vector>

#include "fedsac/core/csv.hpp"
#include "fedsac/core/error.hpp"
#include "fedsac/core/random.hpp"
#include "fedsac/rdn/network.hpp"

namespace fedsac::bench {

struct CaseOptions {
  int n_buses = 74;
  int max_depth = 10;
  double r_min = 0.005, r_max = 0.02;
  double x_min = 0.005, x_max = 0.02;
  double p_load_min = 0.002, p_load_max = 0.01;
  double q_ratio = 0.33;          ///< q_load / p_load (power factor ≈ 0.95)
  double v_min = 0.81, v_max = 1.21;
  int n_evs = 30;                 ///< fleet the line limits are sized for
  double ev_full_power = 0.03 / 0.98;
  double capacity_margin = 1.5;   ///< l_max / worst-case l
};

/// Bus hosting EV `ev` on `net`: EVs are dealt round-robin over aggregator buses.
inline int ev_bus(const rdn::RadialNetwork& net, int ev) {
  const auto agg = net.aggregator_buses();
  if (agg.empty()) {
    throw RangeError("network has no aggregator buses");
  }
  return agg[static_cast<std::size_t>(ev) % agg.size()];
}

/// Random radial feeder: bus k attaches to a uniformly chosen earlier bus
/// (respecting the depth cap), aggregators sit on odd buses, and line limits
/// cover the full-charge load of the whole fleet with margin.
inline rdn::RadialNetwork generate_case(const CaseOptions& opt, std::uint64_t seed) {
  if (opt.n_buses < 2) {
    throw RangeError("gen-case: need at least 2 buses");
  }
  Rng rng = make_rng(seed, "case");
  const int n = opt.n_buses;
  std::vector<int> depth(n, 0);
  std::vector<rdn::BusSpec> buses(n);
  std::vector<rdn::LineSpec> lines;
  buses[0] = rdn::BusSpec{0, 1.0, 1.0, 0.0, 0.0, false};
  for (int k = 1; k < n; ++k) {
    std::vector<int> parents;
    for (int p = 0; p < k; ++p) {
      if (depth[p] < opt.max_depth) parents.push_back(p);
    }
    const int parent = parents[uniform_int(rng, 0, static_cast<int>(parents.size()) - 1)];
    depth[k] = depth[parent] + 1;
    rdn::LineSpec ln;
    ln.from_bus = parent;
    ln.to_bus = k;
    ln.r = uniform(rng, opt.r_min, opt.r_max);
    ln.x = uniform(rng, opt.x_min, opt.x_max);
    ln.b = 0.0;
    lines.push_back(ln);
    const double p = uniform(rng, opt.p_load_min, opt.p_load_max);
    buses[k] = rdn::BusSpec{k, opt.v_min, opt.v_max, p, opt.q_ratio * p, k % 2 == 1};
  }

  // Worst case: every EV charging at full rate. Sized by a lossless sweep
  // with a voltage floor at v_min, which overestimates every current.
  std::vector<double> P(n, 0.0), Q(n, 0.0);  // flow into bus k from its parent
  std::vector<double> extra(n, 0.0);
  {
    std::vector<int> agg;
    for (int k = 1; k < n; k += 2) agg.push_back(k);
    for (int ev = 0; ev < opt.n_evs; ++ev) {
      extra[agg[static_cast<std::size_t>(ev) % agg.size()]] += opt.ev_full_power;
    }
  }
  for (int k = n - 1; k >= 1; --k) {
    P[k] += buses[k].p_load + extra[k];
    Q[k] += buses[k].q_load;
    if (lines[k - 1].from_bus != 0) {
      P[lines[k - 1].from_bus] += P[k];
      Q[lines[k - 1].from_bus] += Q[k];
    }
  }
  for (int k = 1; k < n; ++k) {
    const double l = (P[k] * P[k] + Q[k] * Q[k]) / opt.v_min;
    lines[k - 1].l_max = std::max(opt.capacity_margin * l, 1e-3);
  }
  return rdn::RadialNetwork(std::move(buses), std::move(lines));
}

struct PriceOptions {
  int days = 500;
  double level = 12.0;      ///< mean price, currency/MWh
  double ar_coef = 0.7;     ///< AR(1) coefficient of the relative noise
  double noise_std = 0.08;  ///< innovation std of the relative noise
  double day_spread = 0.2;  ///< daily level factor drawn from 1 ± day_spread
};

/// Daily double-peak profile (morning and evening) in clock hours, mean 1.
inline double price_shape(int clock_hour) {
  auto bump = [](double c, double centre, double width) {
    const double d = c - centre;
    return std::exp(-d * d / (2.0 * width * width));
  };
  auto raw = [&](int c) {
    return 0.3 + 0.9 * bump(c, 9.0, 2.0) + 1.2 * bump(c, 19.0, 2.5);
  };
  double mean = 0.0;
  for (int c = 0; c < 24; ++c) mean += raw(c);
  mean /= 24.0;
  return raw(clock_hour) / mean;
}

/// Hourly synthetic prices: double-peak profile × daily level × AR(1) noise.
/// Hour 0 is midnight of day 0.
inline std::vector<double> generate_prices(const PriceOptions& opt, std::uint64_t seed) {
  if (opt.days < 1 || !(opt.level > 0.0)) {
    throw RangeError("gen-prices: need days >= 1 and a positive level");
  }
  Rng rng = make_rng(seed, "prices");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(opt.days) * 24);
  double e = 0.0;
  for (int d = 0; d < opt.days; ++d) {
    const double day_factor = uniform(rng, 1.0 - opt.day_spread, 1.0 + opt.day_spread);
    for (int c = 0; c < 24; ++c) {
      e = opt.ar_coef * e + opt.noise_std * standard_normal(rng);
      const double p = opt.level * price_shape(c) * day_factor * (1.0 + e);
      out.push_back(std::max(p, 0.05 * opt.level));
    }
  }
  return out;
}

inline void write_prices(const std::vector<double>& prices, const std::filesystem::path& file) {
  csv::Writer w(file, {"hour", "price"});
  for (std::size_t h = 0; h < prices.size(); ++h) {
    w.row(static_cast<long>(h), prices[h]);
  }
}

}  // namespace fedsac::bench
