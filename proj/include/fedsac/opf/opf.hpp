#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "fedsac/core/error.hpp"
#include "fedsac/opf/interior_point.hpp"
#include "fedsac/rdn/network.hpp"
#include "fedsac/rdn/residuals.hpp"

namespace fedsac::opf {

/// Result of one loss-minimizing OPF solve.
struct OPFSolution {
  SolveStatus status = SolveStatus::iteration_limit;
  rdn::FlowState flow;
  double objective = 0.0;        ///< network loss p_sub − Σ loads
  double p_sub = 0.0;            ///< substation active import
  double relaxation_gap = 0.0;   ///< max over lines of l·v − P² − Q²
  bool relaxation_exact = true;  ///< relaxation_gap within tolerance
  int iterations = 0;
};

/// Thrown when a grid signal needs an optimal solve and did not get one.
class OpfFailure : public Error {
 public:
  OpfFailure(SolveStatus status, const std::string& what)
      : Error(what + ": OPF " + to_string(status)), status_(status) {}
  SolveStatus status() const noexcept { return status_; }

 private:
  SolveStatus status_;
};

/// Which quantity the grid signal g_t differences.
enum class GridSignal {
  substation,  ///< change of substation import (default)
  loss_delta,  ///< change of network loss
};

/// The branch-flow OPF with the current definition relaxed to the rotated
/// second-order cone  l ≥ (P² + Q²)/v. Variables are laid out as
/// [P (lines) | Q (lines) | l (lines) | v (buses) | p0].
class OpfProblem {
 public:
  explicit OpfProblem(const rdn::RadialNetwork& net) : net_(&net) { build_structure(); }

  int num_vars() const { return n_; }
  int num_ineq() const { return m_; }
  const Eigen::VectorXd& cost() const { return cost_; }
  const SparseMatrix& eq_matrix() const { return A_; }
  const Eigen::VectorXd& eq_rhs() const { return rhs_; }

  int idx_P(int j) const { return j; }
  int idx_Q(int j) const { return nl_ + j; }
  int idx_l(int j) const { return 2 * nl_ + j; }
  int idx_v(int bus) const { return 3 * nl_ + bus; }
  int idx_p0() const { return 3 * nl_ + nb_; }

  /// Sets the equality right-hand side for the given aggregator loads.
  void set_loads(std::span<const double> agg_loads) {
    if (agg_loads.size() != static_cast<std::size_t>(nb_)) {
      throw ShapeError("OPF: aggregator load vector does not match bus count");
    }
    const auto& buses = net_->buses();
    for (int j = 0; j < nl_; ++j) {
      const int e = net_->lines()[j].to_bus;
      rhs_[j] = buses[e].p_load + agg_loads[e];
      rhs_[nl_ + j] = buses[e].q_load;
      rhs_[2 * nl_ + j] = 0.0;
    }
    rhs_[3 * nl_] = buses[0].p_load + agg_loads[0];
    for (std::size_t k = 0; k < fixed_buses_.size(); ++k) {
      rhs_[3 * nl_ + 1 + static_cast<int>(k)] = buses[fixed_buses_[k]].v_min;
    }
  }

  void ineq_values(const Eigen::VectorXd& x, Eigen::VectorXd& g) const {
    g.resize(m_);
    for (int j = 0; j < nl_; ++j) {
      const auto& ln = net_->lines()[j];
      const double P = x[idx_P(j)], Q = x[idx_Q(j)], l = x[idx_l(j)];
      const double vs = x[idx_v(ln.from_bus)], ve = x[idx_v(ln.to_bus)];
      const double b2 = ln.b * ln.b;
      g[j] = (P * P + Q * Q) / vs - l;
      g[nl_ + j] = l + 0.25 * vs * b2 + ln.b * Q - ln.l_max;
      g[2 * nl_ + j] = l + 0.25 * ve * b2 + ln.b * (ln.x * l - Q) - ln.l_max;
    }
    int row = 3 * nl_;
    for (int bus : bounded_buses_) {
      const auto& bs = net_->buses()[bus];
      g[row++] = bs.v_min - x[idx_v(bus)];
      g[row++] = x[idx_v(bus)] - bs.v_max;
    }
  }

  void ineq_jacobian(const Eigen::VectorXd& x, std::vector<Triplet>& t) const {
    for (int j = 0; j < nl_; ++j) {
      const auto& ln = net_->lines()[j];
      const double P = x[idx_P(j)], Q = x[idx_Q(j)];
      const double vs = x[idx_v(ln.from_bus)];
      const double b2 = ln.b * ln.b;
      t.emplace_back(j, idx_P(j), 2.0 * P / vs);
      t.emplace_back(j, idx_Q(j), 2.0 * Q / vs);
      t.emplace_back(j, idx_v(ln.from_bus), -(P * P + Q * Q) / (vs * vs));
      t.emplace_back(j, idx_l(j), -1.0);

      t.emplace_back(nl_ + j, idx_l(j), 1.0);
      t.emplace_back(nl_ + j, idx_v(ln.from_bus), 0.25 * b2);
      t.emplace_back(nl_ + j, idx_Q(j), ln.b);

      t.emplace_back(2 * nl_ + j, idx_l(j), 1.0 + ln.b * ln.x);
      t.emplace_back(2 * nl_ + j, idx_v(ln.to_bus), 0.25 * b2);
      t.emplace_back(2 * nl_ + j, idx_Q(j), -ln.b);
    }
    int row = 3 * nl_;
    for (int bus : bounded_buses_) {
      t.emplace_back(row++, idx_v(bus), -1.0);
      t.emplace_back(row++, idx_v(bus), 1.0);
    }
  }

  /// Σ zⱼ ∇²gⱼ; only the cone rows are curved.
  void ineq_hessian(const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                    std::vector<Triplet>& t) const {
    for (int j = 0; j < nl_; ++j) {
      const auto& ln = net_->lines()[j];
      const double P = x[idx_P(j)], Q = x[idx_Q(j)];
      const double vs = x[idx_v(ln.from_bus)];
      const double w = z[j];
      const int ip = idx_P(j), iq = idx_Q(j), iv = idx_v(ln.from_bus);
      t.emplace_back(ip, ip, w * 2.0 / vs);
      t.emplace_back(iq, iq, w * 2.0 / vs);
      t.emplace_back(ip, iv, -w * 2.0 * P / (vs * vs));
      t.emplace_back(iv, ip, -w * 2.0 * P / (vs * vs));
      t.emplace_back(iq, iv, -w * 2.0 * Q / (vs * vs));
      t.emplace_back(iv, iq, -w * 2.0 * Q / (vs * vs));
      t.emplace_back(iv, iv, w * 2.0 * (P * P + Q * Q) / (vs * vs * vs));
    }
  }

  bool in_domain(const Eigen::VectorXd& x) const {
    for (int bus = 0; bus < nb_; ++bus) {
      if (!(x[idx_v(bus)] > 0.0) || !std::isfinite(x[idx_v(bus)])) {
        return false;
      }
    }
    return x.allFinite();
  }

  /// Cold start from a backward/forward sweep of the branch-flow equations.
  Eigen::VectorXd sweep_start(std::span<const double> agg_loads) const {
    const auto& lines = net_->lines();
    const auto& buses = net_->buses();
    const auto& order = net_->bfs_order();
    std::vector<double> P(nl_, 0.0), Q(nl_, 0.0), l(nl_, 0.0), v(nb_, 1.0);
    for (int sweep = 0; sweep < 8; ++sweep) {
      for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const int bus = *it;
        const int j = net_->parent_line(bus);
        if (j < 0) continue;
        double p = buses[bus].p_load + agg_loads[bus] + lines[j].r * l[j];
        double q = buses[bus].q_load + lines[j].x * l[j];
        for (int k : net_->child_lines(bus)) {
          p += P[k];
          q += Q[k];
        }
        P[j] = p;
        Q[j] = q;
      }
      bool ok = true;
      for (int bus : order) {
        const int j = net_->parent_line(bus);
        if (j < 0) continue;
        const auto& ln = lines[j];
        v[bus] = v[ln.from_bus] - 2.0 * (ln.r * P[j] + ln.x * Q[j]) +
                 l[j] * (ln.r * ln.r + ln.x * ln.x);
        ok = ok && v[bus] > 0.0 && std::isfinite(v[bus]);
      }
      if (!ok) {
        std::fill(v.begin(), v.end(), 1.0);
        break;
      }
      for (int j = 0; j < nl_; ++j) {
        l[j] = (P[j] * P[j] + Q[j] * Q[j]) / v[lines[j].from_bus];
      }
    }
    Eigen::VectorXd x(n_);
    double p0 = buses[0].p_load + agg_loads[0];
    for (int k : net_->child_lines(0)) p0 += P[k];
    for (int bus = 0; bus < nb_; ++bus) {
      const auto& bs = buses[bus];
      const double margin = 0.05 * (bs.v_max - bs.v_min);
      x[idx_v(bus)] = bs.v_min == bs.v_max ? bs.v_min
                                           : std::clamp(v[bus], bs.v_min + margin, bs.v_max - margin);
    }
    for (int j = 0; j < nl_; ++j) {
      x[idx_P(j)] = P[j];
      x[idx_Q(j)] = Q[j];
      x[idx_l(j)] = (P[j] * P[j] + Q[j] * Q[j]) / x[idx_v(lines[j].from_bus)] + 1e-4;
    }
    x[idx_p0()] = p0;
    return x;
  }

  rdn::FlowState unpack(const Eigen::VectorXd& x) const {
    rdn::FlowState fs;
    fs.P.resize(nl_);
    fs.Q.resize(nl_);
    fs.l.resize(nl_);
    fs.v.resize(nb_);
    for (int j = 0; j < nl_; ++j) {
      fs.P[j] = x[idx_P(j)];
      fs.Q[j] = x[idx_Q(j)];
      fs.l[j] = x[idx_l(j)];
    }
    for (int bus = 0; bus < nb_; ++bus) {
      fs.v[bus] = x[idx_v(bus)];
    }
    fs.p0 = x[idx_p0()];
    return fs;
  }

 private:
  void build_structure() {
    nl_ = static_cast<int>(net_->num_lines());
    nb_ = static_cast<int>(net_->num_buses());
    n_ = 3 * nl_ + nb_ + 1;
    fixed_buses_.clear();
    bounded_buses_.clear();
    for (const auto& b : net_->buses()) {
      (b.v_min == b.v_max ? fixed_buses_ : bounded_buses_).push_back(b.id);
    }
    m_ = 3 * nl_ + 2 * static_cast<int>(bounded_buses_.size());
    const int p = 3 * nl_ + 1 + static_cast<int>(fixed_buses_.size());

    std::vector<Triplet> t;
    for (int j = 0; j < nl_; ++j) {
      const auto& ln = net_->lines()[j];
      t.emplace_back(j, idx_P(j), 1.0);
      t.emplace_back(j, idx_l(j), -ln.r);
      t.emplace_back(nl_ + j, idx_Q(j), 1.0);
      t.emplace_back(nl_ + j, idx_l(j), -ln.x);
      for (int k : net_->child_lines(ln.to_bus)) {
        t.emplace_back(j, idx_P(k), -1.0);
        t.emplace_back(nl_ + j, idx_Q(k), -1.0);
      }
      const int row = 2 * nl_ + j;
      t.emplace_back(row, idx_v(ln.from_bus), 1.0);
      t.emplace_back(row, idx_v(ln.to_bus), -1.0);
      t.emplace_back(row, idx_P(j), -2.0 * ln.r);
      t.emplace_back(row, idx_Q(j), -2.0 * ln.x);
      t.emplace_back(row, idx_l(j), ln.r * ln.r + ln.x * ln.x);
    }
    t.emplace_back(3 * nl_, idx_p0(), 1.0);
    for (int k : net_->child_lines(0)) {
      t.emplace_back(3 * nl_, idx_P(k), -1.0);
    }
    for (std::size_t k = 0; k < fixed_buses_.size(); ++k) {
      t.emplace_back(3 * nl_ + 1 + static_cast<int>(k), idx_v(fixed_buses_[k]), 1.0);
    }
    A_.resize(p, n_);
    A_.setFromTriplets(t.begin(), t.end());
    A_.makeCompressed();
    rhs_ = Eigen::VectorXd::Zero(p);

    // Minimizing Σ r·l is minimizing substation import for fixed loads. The
    // small uniform weight picks the tight point on lossless lines.
    cost_ = Eigen::VectorXd::Zero(n_);
    for (int j = 0; j < nl_; ++j) {
      cost_[idx_l(j)] = net_->lines()[j].r + 1e-6;
    }
  }

  const rdn::RadialNetwork* net_;
  int nl_ = 0, nb_ = 0, n_ = 0, m_ = 0;
  std::vector<int> fixed_buses_;
  std::vector<int> bounded_buses_;
  SparseMatrix A_;
  Eigen::VectorXd rhs_;
  Eigen::VectorXd cost_;
};

namespace detail {

inline OPFSolution finish_solution(const rdn::RadialNetwork& net, const OpfProblem& problem,
                                   const IPMResult& r, std::span<const double> agg_loads,
                                   const IPMSettings& settings) {
  OPFSolution sol;
  sol.status = r.status;
  sol.iterations = r.iterations;
  sol.flow = problem.unpack(r.x);
  sol.p_sub = sol.flow.p0;
  double loads = 0.0;
  for (std::size_t b = 0; b < net.num_buses(); ++b) {
    loads += net.buses()[b].p_load + agg_loads[b];
  }
  sol.objective = sol.p_sub - loads;
  double gap = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < net.num_lines(); ++j) {
    const auto& f = sol.flow;
    const double vs = f.v[net.lines()[j].from_bus];
    gap = std::max(gap, f.l[j] * vs - f.P[j] * f.P[j] - f.Q[j] * f.Q[j]);
  }
  sol.relaxation_gap = net.num_lines() ? gap : 0.0;
  sol.relaxation_exact = sol.relaxation_gap <= std::max(1e-6, settings.tol);
  return sol;
}

}  // namespace detail

/// Loss-minimizing OPF for the given aggregator loads (consumption per bus).
/// `warm_start` optionally seeds the primal iterate (layout of OpfProblem).
inline OPFSolution solve_opf(const rdn::RadialNetwork& net, std::span<const double> agg_loads,
                             const IPMSettings& settings,
                             const Eigen::VectorXd* warm_start = nullptr) {
  if (agg_loads.size() != net.num_buses()) {
    throw ShapeError("solve_opf: aggregator load vector does not match bus count");
  }
  for (std::size_t b = 0; b < agg_loads.size(); ++b) {
    if (!std::isfinite(agg_loads[b])) {
      throw DomainError("solve_opf: non-finite aggregator load");
    }
    if (agg_loads[b] != 0.0 && !net.buses()[b].has_aggregator) {
      throw RangeError("solve_opf: load on bus " + std::to_string(b) + " without aggregator");
    }
  }
  OpfProblem problem(net);
  problem.set_loads(agg_loads);
  Eigen::VectorXd x0 = warm_start && warm_start->size() == problem.num_vars()
                           ? *warm_start
                           : problem.sweep_start(agg_loads);
  if (!problem.in_domain(x0)) {
    x0 = problem.sweep_start(agg_loads);
  }
  const IPMResult r = solve_interior_point(problem, x0, settings);
  return detail::finish_solution(net, problem, r, agg_loads, settings);
}

/// Packs a solved flow back into the OPF variable layout (for warm starts).
inline Eigen::VectorXd pack_flow(const rdn::RadialNetwork& net, const rdn::FlowState& fs) {
  OpfProblem layout(net);
  Eigen::VectorXd x(layout.num_vars());
  for (std::size_t j = 0; j < net.num_lines(); ++j) {
    const int jj = static_cast<int>(j);
    x[layout.idx_P(jj)] = fs.P[j];
    x[layout.idx_Q(jj)] = fs.Q[j];
    x[layout.idx_l(jj)] = fs.l[j];
  }
  for (std::size_t b = 0; b < net.num_buses(); ++b) {
    x[layout.idx_v(static_cast<int>(b))] = fs.v[b];
  }
  x[layout.idx_p0()] = fs.p0;
  return x;
}

/// Grid-side OPF service bound to one network. Caches the zero-EV-load
/// solution, which every grid signal differences against, and warm-starts
/// every loaded solve from it so identical inputs give identical outputs.
class OpfEngine {
 public:
  OpfEngine(std::shared_ptr<const rdn::RadialNetwork> net, IPMSettings settings,
            GridSignal signal = GridSignal::substation)
      : net_(std::move(net)), settings_(settings), signal_(signal) {
    settings_.validate();
  }

  const rdn::RadialNetwork& network() const noexcept { return *net_; }
  const IPMSettings& settings() const noexcept { return settings_; }
  GridSignal signal() const noexcept { return signal_; }

  /// The OPF with all aggregator loads zero; solved once.
  const OPFSolution& zero_load() const {
    std::call_once(zero_once_, [this] {
      std::vector<double> zeros(net_->num_buses(), 0.0);
      zero_ = solve_opf(*net_, zeros, settings_);
      zero_x_ = pack_flow(*net_, zero_.flow);
    });
    return zero_;
  }

  OPFSolution solve(std::span<const double> agg_loads) const {
    const auto& z = zero_load();
    if (std::all_of(agg_loads.begin(), agg_loads.end(), [](double p) { return p == 0.0; }) &&
        agg_loads.size() == net_->num_buses()) {
      return z;
    }
    if (z.status != SolveStatus::optimal) {
      return solve_opf(*net_, agg_loads, settings_);
    }
    return solve_opf(*net_, agg_loads, settings_, &zero_x_);
  }

  /// Signal value of an optimal solution relative to the zero-load solve.
  double signal_of(const OPFSolution& loaded) const {
    const auto& z = zero_load();
    return signal_ == GridSignal::substation ? loaded.p_sub - z.p_sub
                                             : loaded.objective - z.objective;
  }

  /// g_t: substation import with the given loads minus import without EVs.
  double substation_power_change(std::span<const double> agg_loads) const {
    const auto& z = zero_load();
    if (z.status != SolveStatus::optimal) {
      throw OpfFailure(z.status, "zero-load solve");
    }
    const OPFSolution loaded = solve(agg_loads);
    if (loaded.status != SolveStatus::optimal) {
      throw OpfFailure(loaded.status, "loaded solve");
    }
    return signal_of(loaded);
  }

  /// g_{i,t}: the grid signal when only one EV, at `ev_bus`, draws `ev_power`.
  double per_ev_power_change(int ev_bus, double ev_power) const {
    if (ev_bus < 0 || ev_bus >= static_cast<int>(net_->num_buses()) ||
        !net_->buses()[ev_bus].has_aggregator) {
      throw RangeError("per_ev_power_change: bus " + std::to_string(ev_bus) +
                       " has no aggregator");
    }
    std::vector<double> loads(net_->num_buses(), 0.0);
    loads[ev_bus] = ev_power;
    return substation_power_change(loads);
  }

 private:
  std::shared_ptr<const rdn::RadialNetwork> net_;
  IPMSettings settings_;
  GridSignal signal_;
  mutable std::once_flag zero_once_;
  mutable OPFSolution zero_;
  mutable Eigen::VectorXd zero_x_;
};

}  // namespace fedsac::opf
