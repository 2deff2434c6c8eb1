#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Core>

#include "fedsac/core/error.hpp"
#include "fedsac/core/random.hpp"

namespace fedsac::sac {

struct Transition {
  Eigen::VectorXd s;
  double a = 0.0;
  double r = 0.0;
  Eigen::VectorXd s_next;
  bool done = false;
};

/// Column-batched sample: one transition per column.
struct Batch {
  Eigen::MatrixXd s;       ///< obs_dim × B
  Eigen::RowVectorXd a;
  Eigen::RowVectorXd r;
  Eigen::MatrixXd s_next;
  Eigen::RowVectorXd done;  ///< 1 where the transition ends its session

  Eigen::Index size() const { return s.cols(); }
};

/// Fixed-capacity ring buffer with uniform sampling (with replacement).
class ReplayBuffer {
 public:
  ReplayBuffer(int obs_dim, int capacity) : obs_dim_(obs_dim), capacity_(capacity) {
    if (obs_dim < 1 || capacity < 1) throw RangeError("ReplayBuffer needs positive sizes");
    s_.resize(obs_dim, capacity);
    s_next_.resize(obs_dim, capacity);
    a_.resize(capacity);
    r_.resize(capacity);
    done_.resize(capacity);
  }

  int obs_dim() const noexcept { return obs_dim_; }
  int capacity() const noexcept { return capacity_; }
  int size() const noexcept { return size_; }
  long long inserted() const noexcept { return inserted_; }

  void add(const Transition& t) {
    if (t.s.size() != obs_dim_ || t.s_next.size() != obs_dim_) {
      throw ShapeError("ReplayBuffer::add: observation size mismatch");
    }
    if (!t.s.allFinite() || !t.s_next.allFinite() || !std::isfinite(t.a) || !std::isfinite(t.r)) {
      throw RangeError("ReplayBuffer::add: non-finite transition");
    }
    s_.col(head_) = t.s;
    s_next_.col(head_) = t.s_next;
    a_[head_] = t.a;
    r_[head_] = t.r;
    done_[head_] = t.done ? 1.0 : 0.0;
    head_ = (head_ + 1) % capacity_;
    if (size_ < capacity_) ++size_;
    ++inserted_;
  }

  /// i-th stored transition, oldest first.
  Transition at(int i) const {
    if (i < 0 || i >= size_) throw RangeError("ReplayBuffer::at: index out of range");
    const int slot = (head_ - size_ + i + capacity_) % capacity_;
    return {s_.col(slot), a_[slot], r_[slot], s_next_.col(slot), done_[slot] != 0.0};
  }

  Batch sample(int batch, Rng& rng) const {
    if (batch < 1) throw RangeError("ReplayBuffer::sample: batch must be positive");
    if (size_ < batch) {
      throw InsufficientDataError("replay buffer holds " + std::to_string(size_) +
                                  " transitions, batch needs " + std::to_string(batch));
    }
    Batch b;
    b.s.resize(obs_dim_, batch);
    b.s_next.resize(obs_dim_, batch);
    b.a.resize(batch);
    b.r.resize(batch);
    b.done.resize(batch);
    for (int j = 0; j < batch; ++j) {
      const int i = uniform_int(rng, 0, size_ - 1);
      const int slot = (head_ - size_ + i + capacity_) % capacity_;
      b.s.col(j) = s_.col(slot);
      b.s_next.col(j) = s_next_.col(slot);
      b.a[j] = a_[slot];
      b.r[j] = r_[slot];
      b.done[j] = done_[slot];
    }
    return b;
  }

 private:
  int obs_dim_;
  int capacity_;
  int head_ = 0;
  int size_ = 0;
  long long inserted_ = 0;
  Eigen::MatrixXd s_;
  Eigen::MatrixXd s_next_;
  Eigen::RowVectorXd a_;
  Eigen::RowVectorXd r_;
  Eigen::RowVectorXd done_;
};

/// Stacks explicit transitions into a batch (for frozen-batch updates).
inline Batch make_batch(const std::vector<Transition>& ts) {
  if (ts.empty()) throw InsufficientDataError("make_batch: no transitions");
  const auto d = ts.front().s.size();
  const auto n = static_cast<Eigen::Index>(ts.size());
  Batch b;
  b.s.resize(d, n);
  b.s_next.resize(d, n);
  b.a.resize(n);
  b.r.resize(n);
  b.done.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& t = ts[static_cast<std::size_t>(j)];
    if (t.s.size() != d || t.s_next.size() != d) throw ShapeError("make_batch: size mismatch");
    b.s.col(j) = t.s;
    b.s_next.col(j) = t.s_next;
    b.a[j] = t.a;
    b.r[j] = t.r;
    b.done[j] = t.done ? 1.0 : 0.0;
  }
  return b;
}

}  // namespace fedsac::sac
