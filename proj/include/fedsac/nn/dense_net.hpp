#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fedsac/core/allocator.hpp"
#include "fedsac/core/error.hpp"
#include "fedsac/core/random.hpp"

namespace fedsac::nn {

enum class Activation { relu, linear };

inline const char* to_string(Activation a) { return a == Activation::relu ? "relu" : "linear"; }

/// Intermediate values of one batched forward pass, consumed by backward.
struct Tape {
  std::vector<Eigen::MatrixXd> inputs;  ///< input of each layer (features × batch)
  std::vector<Eigen::MatrixXd> pre;     ///< pre-activation of each layer
  Eigen::MatrixXd output;
  std::uint64_t version = 0;
  const void* owner = nullptr;
};

/// Fully connected network with rectifier hidden layers and a linear output.
/// All parameters live in one contiguous vector: for each layer its weight
/// matrix (out × in, column-major) followed by its bias.
class DenseNet {
 public:
  DenseNet() = default;

  explicit DenseNet(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw ShapeError("DenseNet needs at least an input and an output size");
    std::size_t n = 0;
    for (std::size_t k = 0; k + 1 < sizes_.size(); ++k) {
      if (sizes_[k] < 1 || sizes_[k + 1] < 1) throw ShapeError("DenseNet layer sizes must be positive");
      w_offset_.push_back(n);
      n += static_cast<std::size_t>(sizes_[k]) * static_cast<std::size_t>(sizes_[k + 1]);
      b_offset_.push_back(n);
      n += static_cast<std::size_t>(sizes_[k + 1]);
    }
    params_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  }

  /// Input sizes, hidden widths and output size, e.g. {54, 128, 128, 128, 1}.
  const std::vector<int>& sizes() const noexcept { return sizes_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  int num_layers() const { return static_cast<int>(sizes_.size()) - 1; }
  Activation activation(int layer) const {
    return layer + 1 < num_layers() ? Activation::relu : Activation::linear;
  }
  Eigen::Index num_params() const { return params_.size(); }
  std::uint64_t version() const noexcept { return version_; }

  const Eigen::VectorXd& params() const noexcept { return params_; }
  /// Writable parameters; invalidates outstanding tapes.
  Eigen::VectorXd& mutable_params() {
    ++version_;
    return params_;
  }
  void set_params(const Eigen::VectorXd& p) {
    if (p.size() != params_.size()) throw ShapeError("DenseNet::set_params: size mismatch");
    mutable_params() = p;
  }

  Eigen::Map<const Eigen::MatrixXd> weight(int layer) const {
    return {params_.data() + w_offset_[layer], sizes_[layer + 1], sizes_[layer]};
  }
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const {
    return {params_.data() + b_offset_[layer], sizes_[layer + 1]};
  }
  Eigen::Index weight_offset(int layer) const { return static_cast<Eigen::Index>(w_offset_[layer]); }
  Eigen::Index bias_offset(int layer) const { return static_cast<Eigen::Index>(b_offset_[layer]); }

  /// Uniform(−1/√fan_in, 1/√fan_in) for weights and biases.
  void init_uniform(Rng& rng) {
    auto& p = mutable_params();
    for (int k = 0; k < num_layers(); ++k) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[k]));
      const auto count = static_cast<std::size_t>(sizes_[k]) * sizes_[k + 1] + sizes_[k + 1];
      for (std::size_t i = 0; i < count; ++i) {
        p[static_cast<Eigen::Index>(w_offset_[k] + i)] = uniform(rng, -bound, bound);
      }
    }
  }

  /// Batched inference; columns of X are samples.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& X) const {
    check_input(X);
    Eigen::MatrixXd h = X;
    for (int k = 0; k < num_layers(); ++k) {
      Eigen::MatrixXd z = weight(k) * h;
      z.colwise() += bias(k);
      h = activation(k) == Activation::relu ? Eigen::MatrixXd(z.cwiseMax(0.0)) : std::move(z);
    }
    return h;
  }

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const {
    return forward(Eigen::MatrixXd(x)).col(0);
  }

  /// Batched forward pass recording what backward needs.
  const Eigen::MatrixXd& forward(const Eigen::MatrixXd& X, Tape& tape) const {
    check_input(X);
    tape.inputs.resize(static_cast<std::size_t>(num_layers()));
    tape.pre.resize(static_cast<std::size_t>(num_layers()));
    tape.inputs[0] = X;
    for (int k = 0; k < num_layers(); ++k) {
      auto& z = tape.pre[k];
      z.noalias() = weight(k) * tape.inputs[k];
      z.colwise() += bias(k);
      if (k + 1 < num_layers()) {
        tape.inputs[k + 1] = z.cwiseMax(0.0);
      } else {
        tape.output = z;
      }
    }
    tape.version = version_;
    tape.owner = this;
    return tape.output;
  }

  /// Reverse pass for upstream gradient dY (output × batch). Adds parameter
  /// gradients into `grad` (if non-null) and writes the input gradient into
  /// `dX` (if non-null).
  void backward(const Tape& tape, const Eigen::MatrixXd& dY, Eigen::VectorXd* grad,
                Eigen::MatrixXd* dX) const {
    if (tape.owner != this || tape.version != version_) {
      throw StaleCacheError("DenseNet::backward: tape does not match current parameters");
    }
    if (dY.rows() != output_size() || dY.cols() != tape.output.cols()) {
      throw ShapeError("DenseNet::backward: upstream gradient shape mismatch");
    }
    if (grad && grad->size() != params_.size()) {
      throw ShapeError("DenseNet::backward: gradient buffer size mismatch");
    }
    Eigen::MatrixXd delta = dY;
    for (int k = num_layers() - 1; k >= 0; --k) {
      if (k + 1 < num_layers()) {
        delta = delta.cwiseProduct((tape.pre[k].array() > 0.0).cast<double>().matrix());
      }
      if (grad) {
        Eigen::Map<Eigen::MatrixXd> gW(grad->data() + w_offset_[k], sizes_[k + 1], sizes_[k]);
        Eigen::Map<Eigen::VectorXd> gb(grad->data() + b_offset_[k], sizes_[k + 1]);
        gW.noalias() += delta * tape.inputs[k].transpose();
        gb.noalias() += delta.rowwise().sum();
      }
      if (k > 0 || dX) {
        Eigen::MatrixXd next = weight(k).transpose() * delta;
        delta = std::move(next);
      }
    }
    if (dX) *dX = std::move(delta);
  }

 private:
  void check_input(const Eigen::MatrixXd& X) const {
    if (sizes_.empty()) throw ShapeError("DenseNet: empty network");
    if (X.rows() != input_size()) {
      throw ShapeError("DenseNet: input has " + std::to_string(X.rows()) + " features, expected " +
                       std::to_string(input_size()));
    }
  }

  std::vector<int> sizes_;
  std::vector<std::size_t> w_offset_;
  std::vector<std::size_t> b_offset_;
  Eigen::VectorXd params_;
  std::uint64_t version_ = 0;
};

/// target ← τ·source + (1 − τ)·target, elementwise.
inline void polyak_update(Eigen::VectorXd& target, const Eigen::VectorXd& source, double tau) {
  if (target.size() != source.size()) throw ShapeError("polyak_update: size mismatch");
  if (!(tau > 0.0 && tau <= 1.0)) throw RangeError("polyak_update: tau must lie in (0, 1]");
  if (tau == 1.0) {
    target = source;
    return;
  }
  target += tau * (source - target);
}

inline void polyak_update(DenseNet& target, const DenseNet& source, double tau) {
  polyak_update(target.mutable_params(), source.params(), tau);
}

}  // namespace fedsac::nn
