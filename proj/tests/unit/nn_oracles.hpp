#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "fedsac/core/random.hpp"
#include "fedsac/nn/dense_net.hpp"
#include "fedsac/nn/squashed_gaussian.hpp"

namespace oracles {

using fedsac::Rng;
using fedsac::nn::DenseNet;

/// Forward pass by explicit loops over the flat parameter layout.
inline Eigen::MatrixXd naive_forward(const DenseNet& net, const Eigen::MatrixXd& X) {
  const auto& p = net.params();
  const auto& sizes = net.sizes();
  std::vector<std::vector<double>> h(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    for (Eigen::Index r = 0; r < X.rows(); ++r) h[c].push_back(X(r, c));
  }
  std::size_t off = 0;
  for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
    const int in = sizes[k], out = sizes[k + 1];
    const bool last = k + 2 == sizes.size();
    for (auto& col : h) {
      std::vector<double> next(static_cast<std::size_t>(out));
      for (int i = 0; i < out; ++i) {
        double z = p[static_cast<Eigen::Index>(off + static_cast<std::size_t>(in) * out + i)];
        for (int j = 0; j < in; ++j) {
          z += p[static_cast<Eigen::Index>(off + static_cast<std::size_t>(j) * out + i)] * col[j];
        }
        next[i] = last ? z : (z > 0.0 ? z : 0.0);
      }
      col = std::move(next);
    }
    off += static_cast<std::size_t>(in) * out + out;
  }
  Eigen::MatrixXd Y(sizes.back(), X.cols());
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    for (Eigen::Index r = 0; r < Y.rows(); ++r) Y(r, c) = h[c][r];
  }
  return Y;
}

/// Random architecture with 1–4 hidden layers of width 1–128.
inline DenseNet random_net(Rng& rng, int max_hidden = 4, int max_width = 128) {
  std::vector<int> sizes{fedsac::uniform_int(rng, 1, 12)};
  const int hidden = fedsac::uniform_int(rng, 1, max_hidden);
  for (int k = 0; k < hidden; ++k) sizes.push_back(fedsac::uniform_int(rng, 1, max_width));
  sizes.push_back(fedsac::uniform_int(rng, 1, 3));
  DenseNet net(sizes);
  net.init_uniform(rng);
  return net;
}

inline Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j) {
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = fedsac::standard_normal(rng);
  }
  return m;
}

struct GradCheck {
  double max_rel_error = 0.0;
  int checked = 0;
  int skipped_kinks = 0;
};

/// Compares backward against central differences (h = 1e-5) for the scalar
/// loss sum(C ⊙ net(X)). Checks up to `samples` parameters plus every input
/// coordinate; perturbations that flip any rectifier are skipped. Relative
/// error is |g − fd| / max(|g|, |fd|, 1e-3).
inline GradCheck check_gradients(const DenseNet& base, std::uint64_t seed, int samples = 200) {
  Rng rng = fedsac::make_rng(seed, "gradcheck");
  DenseNet net = base;
  const Eigen::Index B = 3;
  const Eigen::MatrixXd X = random_matrix(rng, net.input_size(), B);
  const Eigen::MatrixXd C = random_matrix(rng, net.output_size(), B);
  fedsac::nn::Tape tape;
  net.forward(X, tape);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(net.num_params());
  Eigen::MatrixXd dX;
  net.backward(tape, C, &grad, &dX);

  auto masks = [](const fedsac::nn::Tape& t) {
    std::vector<Eigen::ArrayXXd> m;
    for (std::size_t k = 0; k + 1 < t.pre.size(); ++k) m.push_back((t.pre[k].array() > 0.0).cast<double>());
    return m;
  };
  const auto base_mask = masks(tape);
  auto same_mask = [&](const fedsac::nn::Tape& t) {
    const auto m = masks(t);
    for (std::size_t k = 0; k < m.size(); ++k) {
      if (!(m[k] == base_mask[k]).all()) return false;
    }
    return true;
  };
  auto loss = [&](const Eigen::MatrixXd& in, fedsac::nn::Tape& t) {
    return (C.array() * net.forward(in, t).array()).sum();
  };

  GradCheck out;
  const double h = 1e-5;
  auto record = [&](double g, double fd) {
    const double rel = std::abs(g - fd) / std::max({std::abs(g), std::abs(fd), 1e-3});
    out.max_rel_error = std::max(out.max_rel_error, rel);
    ++out.checked;
  };
  fedsac::nn::Tape tp, tm;
  const Eigen::Index n = net.num_params();
  const int count = static_cast<int>(std::min<Eigen::Index>(samples, n));
  for (int s = 0; s < count; ++s) {
    const Eigen::Index i = count == n ? s : fedsac::uniform_int(rng, 0, static_cast<int>(n - 1));
    const double keep = net.params()[i];
    net.mutable_params()[i] = keep + h;
    const double lp = loss(X, tp);
    net.mutable_params()[i] = keep - h;
    const double lm = loss(X, tm);
    net.mutable_params()[i] = keep;
    if (!same_mask(tp) || !same_mask(tm)) {
      ++out.skipped_kinks;
      continue;
    }
    record(grad[i], (lp - lm) / (2.0 * h));
  }
  for (Eigen::Index c = 0; c < B; ++c) {
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
      Eigen::MatrixXd Xp = X, Xm = X;
      Xp(r, c) += h;
      Xm(r, c) -= h;
      const double lp = loss(Xp, tp);
      const double lm = loss(Xm, tm);
      if (!same_mask(tp) || !same_mask(tm)) {
        ++out.skipped_kinks;
        continue;
      }
      record(dX(r, c), (lp - lm) / (2.0 * h));
    }
  }
  return out;
}

/// Max relative error over `nets` random architectures up to 4×128.
inline GradCheck gradient_suite(int nets, std::uint64_t seed) {
  GradCheck total;
  for (int k = 0; k < nets; ++k) {
    Rng rng = fedsac::make_rng(seed, "gradsuite", {static_cast<std::uint64_t>(k)});
    const DenseNet net = random_net(rng);
    const GradCheck g = check_gradients(net, seed + 1000 + k);
    total.max_rel_error = std::max(total.max_rel_error, g.max_rel_error);
    total.checked += g.checked;
    total.skipped_kinks += g.skipped_kinks;
  }
  return total;
}

/// Standard normal CDF.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Asymptotic Kolmogorov p-value for statistic D over n samples.
inline double ks_p_value(double D, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * D;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    p += term;
    if (std::abs(term) < 1e-16) break;
  }
  return std::clamp(p, 0.0, 1.0);
}

/// KS test of squashed-Gaussian draws against the closed-form CDF
/// F(a) = Φ((atanh(2(a − lo)/(hi − lo) − 1) − μ)/σ).
inline double squashed_ks_p_value(double mu, double sigma, fedsac::nn::ActionBounds b,
                                  std::size_t n, std::uint64_t seed) {
  Rng rng = fedsac::make_rng(seed, "ks");
  Eigen::RowVectorXd eps(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps[i] = fedsac::standard_normal(rng);
  const Eigen::RowVectorXd m = Eigen::RowVectorXd::Constant(eps.size(), mu);
  const Eigen::RowVectorXd ls = Eigen::RowVectorXd::Constant(eps.size(), std::log(sigma));
  const auto s = fedsac::nn::sample_squashed(m, ls, eps, b);
  std::vector<double> a(s.action.data(), s.action.data() + s.action.size());
  std::sort(a.begin(), a.end());
  double D = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = 2.0 * (a[i] - b.lo) / (b.hi - b.lo) - 1.0;
    const double F = normal_cdf((std::atanh(y) - mu) / sigma);
    D = std::max({D, F - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - F});
  }
  return ks_p_value(D, n);
}

}  // namespace oracles
