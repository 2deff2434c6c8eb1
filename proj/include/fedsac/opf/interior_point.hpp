#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "fedsac/core/error.hpp"

namespace fedsac::opf {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using Triplet = Eigen::Triplet<double, int>;

struct IPMSettings {
  double tol = 1e-6;          ///< KKT residual tolerance
  int max_iter = 100;
  double mu_reduction = 0.1;  ///< centering factor when predictor-corrector is off
  double step_fraction = 0.995;
  bool predictor_corrector = true;

  void validate() const {
    if (!(tol > 0.0 && tol < 1.0) || max_iter < 1 || !(mu_reduction > 0.0 && mu_reduction < 1.0) ||
        !(step_fraction > 0.0 && step_fraction < 1.0)) {
      throw RangeError("IPMSettings out of range");
    }
  }
};

enum class SolveStatus { optimal, infeasible, iteration_limit };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal:
      return "optimal";
    case SolveStatus::infeasible:
      return "infeasible";
    case SolveStatus::iteration_limit:
      return "iteration_limit";
  }
  return "unknown";
}

/// A smooth convex program
///
///   minimize cᵀx  subject to  A x = b,  g(x) ≤ 0,
///
/// with each gᵢ convex and twice differentiable on the problem's domain.
template <typename P>
concept ConvexProgram = requires(const P& p, const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                                 Eigen::VectorXd& out, std::vector<Triplet>& trips) {
  { p.num_vars() } -> std::convertible_to<int>;
  { p.num_ineq() } -> std::convertible_to<int>;
  { p.cost() } -> std::convertible_to<const Eigen::VectorXd&>;
  { p.eq_matrix() } -> std::convertible_to<const SparseMatrix&>;
  { p.eq_rhs() } -> std::convertible_to<const Eigen::VectorXd&>;
  p.ineq_values(x, out);
  p.ineq_jacobian(x, trips);
  p.ineq_hessian(x, z, trips);
  { p.in_domain(x) } -> std::convertible_to<bool>;
};

struct IPMResult {
  SolveStatus status = SolveStatus::iteration_limit;
  Eigen::VectorXd x;
  Eigen::VectorXd y;  ///< equality multipliers
  Eigen::VectorXd z;  ///< inequality multipliers
  Eigen::VectorXd s;  ///< inequality slacks
  int iterations = 0;
  double primal_infeasibility = 0.0;
  double dual_infeasibility = 0.0;
  double complementarity = 0.0;  ///< sᵀz
};

namespace detail {

/// Largest α in (0, 1] keeping v + α·dv ≥ (1 − fraction)·v componentwise.
inline double step_to_boundary(const Eigen::VectorXd& v, const Eigen::VectorXd& dv,
                               double fraction) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv[i] < 0.0) {
      alpha = std::min(alpha, -fraction * v[i] / dv[i]);
    }
  }
  return alpha;
}

}  // namespace detail

/// Primal-dual path-following interior-point method with Mehrotra
/// predictor-corrector and a fraction-to-boundary rule.
///
/// Each iteration solves the reduced KKT system
///
///   [ H + Jᵀ S⁻¹Z J + δ_w I   Aᵀ ] [dx]   [ −r_d − Jᵀ S⁻¹(Z r_g − r_c) ]
///   [ A                     −δ_c ] [dy] = [ −r_p                     ]
///
/// where r_d = c + Aᵀy + Jᵀz, r_p = Ax − b, r_g = g(x) + s and r_c is the
/// (shifted) complementarity residual. The slack and multiplier directions are
/// recovered by back substitution.
template <ConvexProgram Problem>
IPMResult solve_interior_point(const Problem& problem, const Eigen::VectorXd& x_start,
                               const IPMSettings& settings) {
  settings.validate();
  const int n = problem.num_vars();
  const int m = problem.num_ineq();
  const SparseMatrix& A = problem.eq_matrix();
  const Eigen::VectorXd& b = problem.eq_rhs();
  const Eigen::VectorXd& c = problem.cost();
  const int p = static_cast<int>(A.rows());
  if (x_start.size() != n || A.cols() != n || c.size() != n || b.size() != p) {
    throw ShapeError("solve_interior_point: inconsistent problem dimensions");
  }
  if (!problem.in_domain(x_start)) {
    throw DomainError("solve_interior_point: start point outside the problem domain");
  }

  IPMResult res;
  Eigen::VectorXd x = x_start;
  Eigen::VectorXd y = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd g(m);
  problem.ineq_values(x, g);
  Eigen::VectorXd s = (-g).cwiseMax(1e-2);
  Eigen::VectorXd z = Eigen::VectorXd::Ones(m);

  const SparseMatrix At = A.transpose();
  std::vector<Triplet> jac_trips;
  std::vector<Triplet> kkt_trips;
  SparseMatrix J(m, n);
  SparseMatrix K(n + p, n + p);
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  bool pattern_ready = false;
  double reg = 1e-11;
  int stalled = 0;

  auto primal_inf = [&](const Eigen::VectorXd& rp, const Eigen::VectorXd& rg) {
    double v = 0.0;
    if (rp.size()) v = rp.lpNorm<Eigen::Infinity>();
    if (rg.size()) v = std::max(v, rg.lpNorm<Eigen::Infinity>());
    return v;
  };

  for (int iter = 0; iter <= settings.max_iter; ++iter) {
    problem.ineq_values(x, g);
    jac_trips.clear();
    problem.ineq_jacobian(x, jac_trips);
    J.setFromTriplets(jac_trips.begin(), jac_trips.end());

    const Eigen::VectorXd r_d = c + At * y + J.transpose() * z;
    const Eigen::VectorXd r_p = A * x - b;
    const Eigen::VectorXd r_g = g + s;
    const double gap = s.dot(z);
    const double mu = m > 0 ? gap / m : 0.0;

    res.iterations = iter;
    res.primal_infeasibility = primal_inf(r_p, r_g);
    res.dual_infeasibility = r_d.size() ? r_d.lpNorm<Eigen::Infinity>() : 0.0;
    res.complementarity = gap;

    if (res.primal_infeasibility <= settings.tol && res.dual_infeasibility <= settings.tol &&
        gap <= 1e-3 * settings.tol) {
      res.status = SolveStatus::optimal;
      break;
    }
    if (iter == settings.max_iter) {
      res.status = res.primal_infeasibility > std::sqrt(settings.tol)
                       ? SolveStatus::infeasible
                       : SolveStatus::iteration_limit;
      break;
    }
    // Diverging multipliers with a persistent primal residual certify (in
    // practice) that the feasible set is empty.
    if ((z.size() && z.maxCoeff() > 1e10) || stalled >= 8) {
      if (res.primal_infeasibility > settings.tol) {
        res.status = SolveStatus::infeasible;
        break;
      }
    }

    const Eigen::VectorXd sigma_diag = z.cwiseQuotient(s);

    // Assemble K = [W Aᵀ; A −δ_c].
    kkt_trips.clear();
    problem.ineq_hessian(x, z, kkt_trips);
    {
      const SparseMatrix JtSJ = SparseMatrix(J.transpose() * sigma_diag.asDiagonal() * J);
      for (int k = 0; k < JtSJ.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(JtSJ, k); it; ++it) {
          kkt_trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
        }
      }
    }
    for (int i = 0; i < n; ++i) {
      kkt_trips.emplace_back(i, i, reg);
    }
    for (int k = 0; k < A.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(A, k); it; ++it) {
        kkt_trips.emplace_back(n + static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
        kkt_trips.emplace_back(static_cast<int>(it.col()), n + static_cast<int>(it.row()), it.value());
      }
    }
    for (int i = 0; i < p; ++i) {
      kkt_trips.emplace_back(n + i, n + i, -1e-13);
    }
    K.setFromTriplets(kkt_trips.begin(), kkt_trips.end());
    K.makeCompressed();
    if (!pattern_ready) {
      lu.analyzePattern(K);
      pattern_ready = true;
    }
    lu.factorize(K);
    if (lu.info() != Eigen::Success) {
      lu.analyzePattern(K);
      lu.factorize(K);
      if (lu.info() != Eigen::Success) {
        reg *= 100.0;
        if (reg > 1e-2) {
          res.status = SolveStatus::infeasible;
          break;
        }
        continue;
      }
    }

    Eigen::VectorXd dx, dy, ds, dz;
    auto solve_direction = [&](const Eigen::VectorXd& r_c) {
      Eigen::VectorXd rhs(n + p);
      rhs.head(n) = -r_d - J.transpose() * (z.cwiseProduct(r_g) - r_c).cwiseQuotient(s);
      rhs.tail(p) = -r_p;
      const Eigen::VectorXd sol = lu.solve(rhs);
      dx = sol.head(n);
      dy = sol.tail(p);
      ds = -r_g - J * dx;
      dz = (-r_c - z.cwiseProduct(ds)).cwiseQuotient(s);
    };

    double sigma = settings.mu_reduction;
    Eigen::VectorXd r_c = s.cwiseProduct(z);
    if (settings.predictor_corrector && m > 0) {
      solve_direction(r_c);
      const double a_p = detail::step_to_boundary(s, ds, 1.0);
      const double a_d = detail::step_to_boundary(z, dz, 1.0);
      const double mu_aff = (s + a_p * ds).dot(z + a_d * dz) / m;
      sigma = std::clamp(std::pow(mu_aff / std::max(mu, 1e-300), 3.0), 0.0, 1.0);
      r_c += ds.cwiseProduct(dz);
    }
    r_c.array() -= sigma * mu;
    solve_direction(r_c);
    if (!dx.allFinite() || !dz.allFinite()) {
      reg *= 100.0;
      if (reg > 1e-2) {
        res.status = SolveStatus::infeasible;
        break;
      }
      continue;
    }

    double alpha_p = detail::step_to_boundary(s, ds, settings.step_fraction);
    const double alpha_d = detail::step_to_boundary(z, dz, settings.step_fraction);
    while (alpha_p > 1e-14 && !problem.in_domain(x + alpha_p * dx)) {
      alpha_p *= 0.5;
    }
    stalled = (alpha_p < 1e-6 || alpha_d < 1e-6) ? stalled + 1 : 0;

    x += alpha_p * dx;
    s += alpha_p * ds;
    y += alpha_d * dy;
    z += alpha_d * dz;
  }

  res.x = std::move(x);
  res.y = std::move(y);
  res.z = std::move(z);
  res.s = std::move(s);
  return res;
}

}  // namespace fedsac::opf
