#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "fedsac/core/error.hpp"

namespace fedsac::nn {

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

/// Action box [lo, hi] reached through tanh and an affine map.
struct ActionBounds {
  double lo = -0.2;
  double hi = 1.0;

  double half_width() const { return 0.5 * (hi - lo); }
  double squash(double u) const { return lo + half_width() * (std::tanh(u) + 1.0); }
  void validate() const {
    if (!(lo < hi)) throw RangeError("action bounds need lo < hi");
  }
};

/// log(1 − tanh²u), stable for large |u|.
inline double log_one_minus_tanh2(double u) {
  const double a = std::abs(u);
  return 2.0 * (std::log(2.0) - a - std::log1p(std::exp(-2.0 * a)));
}

/// Batched reparameterized draw: one column per sample. The raw
/// log-standard-deviation is clamped to [−20, 2] before use.
struct SquashedSample {
  Eigen::RowVectorXd u;
  Eigen::RowVectorXd action;
  Eigen::RowVectorXd log_prob;
  // Partial derivatives with ε held fixed.
  Eigen::RowVectorXd da_dmu;       ///< ∂a/∂μ
  Eigen::RowVectorXd da_dls;       ///< ∂a/∂(raw log σ), zero where clamped
  Eigen::RowVectorXd dlogp_dmu;    ///< ∂log π/∂μ
  Eigen::RowVectorXd dlogp_dls;    ///< ∂log π/∂(raw log σ), zero where clamped
};

inline SquashedSample sample_squashed(const Eigen::RowVectorXd& mu,
                                      const Eigen::RowVectorXd& log_std,
                                      const Eigen::RowVectorXd& eps,
                                      const ActionBounds& bounds) {
  const Eigen::Index n = mu.size();
  if (log_std.size() != n || eps.size() != n) throw ShapeError("sample_squashed: size mismatch");
  bounds.validate();
  const double s = bounds.half_width();
  const double log_norm = 0.5 * std::log(2.0 * M_PI) + std::log(s);
  SquashedSample out;
  out.u.resize(n);
  out.action.resize(n);
  out.log_prob.resize(n);
  out.da_dmu.resize(n);
  out.da_dls.resize(n);
  out.dlogp_dmu.resize(n);
  out.dlogp_dls.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double raw = log_std[i];
    const bool clamped = raw < kLogStdMin || raw > kLogStdMax;
    const double ls = std::clamp(raw, kLogStdMin, kLogStdMax);
    const double sigma = std::exp(ls);
    const double u = mu[i] + sigma * eps[i];
    const double y = std::tanh(u);
    const double slope = s * (1.0 - y * y);
    out.u[i] = u;
    out.action[i] = std::clamp(bounds.lo + s * (y + 1.0), bounds.lo, bounds.hi);
    out.log_prob[i] = -0.5 * eps[i] * eps[i] - ls - log_norm - log_one_minus_tanh2(u);
    out.da_dmu[i] = slope;
    out.da_dls[i] = clamped ? 0.0 : slope * sigma * eps[i];
    out.dlogp_dmu[i] = 2.0 * y;
    out.dlogp_dls[i] = clamped ? 0.0 : -1.0 + 2.0 * y * sigma * eps[i];
  }
  return out;
}

/// Density of the squashed action at `a` for pre-squash Normal(μ, σ).
inline double squashed_density(double a, double mu, double sigma, const ActionBounds& b) {
  if (!(a > b.lo && a < b.hi)) return 0.0;
  const double s = b.half_width();
  const double y = (a - b.lo) / s - 1.0;
  const double u = std::atanh(y);
  const double z = (u - mu) / sigma;
  const double pdf_u = std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * M_PI));
  return pdf_u / (s * (1.0 - y * y));
}

}  // namespace fedsac::nn
