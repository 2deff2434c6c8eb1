#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "fedsac/core/csv.hpp"
#include "fedsac/core/error.hpp"
#include "fedsac/core/random.hpp"
#include "fedsac/nn/adam.hpp"
#include "fedsac/nn/checkpoint.hpp"
#include "fedsac/nn/dense_net.hpp"
#include "fedsac/nn/squashed_gaussian.hpp"
#include "fedsac/sac/replay_buffer.hpp"

namespace fedsac::sac {

struct SACHyper {
  double gamma = 0.99;
  double tau = 0.005;
  double lr_q = 3e-4;
  double lr_pi = 1e-4;
  double lr_alpha = 2e-4;
  int batch = 512;
  int buffer_capacity = 10000;
  double target_entropy = -1.0;
  int updates_per_episode = 0;  ///< 0: one round per stored transition of the episode
  double init_alpha = 1.0;
  std::vector<int> actor_hidden{128, 128, 128, 128};
  std::vector<int> critic_hidden{128, 128, 128};
  nn::ActionBounds bounds{-0.2, 1.0};

  void validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw RangeError("sac.gamma must lie in [0, 1]");
    if (!(tau > 0.0 && tau <= 1.0)) throw RangeError("sac.tau must lie in (0, 1]");
    if (!(lr_q > 0.0 && lr_pi > 0.0 && lr_alpha > 0.0)) {
      throw RangeError("sac learning rates must be positive");
    }
    if (batch < 1 || buffer_capacity < 1) throw RangeError("sac.batch and sac.buffer_capacity must be positive");
    if (updates_per_episode < 0) throw RangeError("sac.updates_per_episode must be >= 0");
    if (!(init_alpha > 0.0)) throw RangeError("sac.init_alpha must be positive");
    if (!std::isfinite(target_entropy)) throw RangeError("sac.target_entropy must be finite");
    for (int w : actor_hidden) {
      if (w < 1) throw RangeError("sac.actor_hidden widths must be positive");
    }
    for (int w : critic_hidden) {
      if (w < 1) throw RangeError("sac.critic_hidden widths must be positive");
    }
    bounds.validate();
  }
};

/// Actor and twin critics, the part exchanged with the server.
struct Snapshot {
  nn::DenseNet actor;
  nn::DenseNet critic1;
  nn::DenseNet critic2;

  nn::Bundle to_bundle() const {
    nn::Bundle b;
    b.nets.emplace("actor", actor);
    b.nets.emplace("critic1", critic1);
    b.nets.emplace("critic2", critic2);
    return b;
  }
  static Snapshot from_bundle(const nn::Bundle& b) {
    auto get = [&](const char* name) {
      auto it = b.nets.find(name);
      if (it == b.nets.end()) throw ParseError(std::string("snapshot: missing network ") + name);
      return it->second;
    };
    return {get("actor"), get("critic1"), get("critic2")};
  }
};

enum class ActionMode { stochastic, deterministic };

/// Critic values and their action derivative for a batch.
struct CriticEval {
  Eigen::RowVectorXd q;
  Eigen::RowVectorXd dq_da;
};

/// One soft actor-critic learner with twin critics and learned temperature.
class SACAgent {
 public:
  SACAgent(int obs_dim, SACHyper hyper, std::uint64_t seed)
      : obs_dim_(obs_dim), hyper_(std::move(hyper)), buffer_(obs_dim, hyper_.buffer_capacity),
        policy_rng_(make_rng(seed, "policy")), update_rng_(make_rng(seed, "update")) {
    hyper_.validate();
    std::vector<int> a{obs_dim};
    a.insert(a.end(), hyper_.actor_hidden.begin(), hyper_.actor_hidden.end());
    a.push_back(2);
    std::vector<int> c{obs_dim + 1};
    c.insert(c.end(), hyper_.critic_hidden.begin(), hyper_.critic_hidden.end());
    c.push_back(1);
    Rng init = make_rng(seed, "init");
    actor_ = nn::DenseNet(a);
    actor_.init_uniform(init);
    for (auto& q : critics_) {
      q = nn::DenseNet(c);
      q.init_uniform(init);
    }
    targets_ = critics_;
    actor_opt_ = nn::Adam(actor_.num_params(), hyper_.lr_pi);
    for (auto& o : critic_opt_) o = nn::Adam(critics_[0].num_params(), hyper_.lr_q);
    log_alpha_ = std::log(hyper_.init_alpha);
    alpha_opt_ = nn::Adam(1, hyper_.lr_alpha);
  }

  int obs_dim() const noexcept { return obs_dim_; }
  const SACHyper& hyper() const noexcept { return hyper_; }
  double alpha() const { return std::exp(log_alpha_); }
  double log_alpha() const noexcept { return log_alpha_; }
  void set_log_alpha(double v) { log_alpha_ = v; }
  const nn::DenseNet& actor() const noexcept { return actor_; }
  const nn::DenseNet& critic(int k) const { return critics_.at(static_cast<std::size_t>(k)); }
  const nn::DenseNet& target(int k) const { return targets_.at(static_cast<std::size_t>(k)); }
  nn::DenseNet& mutable_actor() noexcept { return actor_; }
  nn::DenseNet& mutable_critic(int k) { return critics_.at(static_cast<std::size_t>(k)); }
  nn::DenseNet& mutable_target(int k) { return targets_.at(static_cast<std::size_t>(k)); }
  const ReplayBuffer& buffer() const noexcept { return buffer_; }
  ReplayBuffer& buffer() noexcept { return buffer_; }
  /// Per-critic mean squared residual of the last critic_update.
  const std::array<double, 2>& last_critic_losses() const noexcept { return last_losses_; }

  void remember(const Transition& t) { buffer_.add(t); }

  /// Charging rate for one observation.
  double select_action(const Eigen::VectorXd& obs, ActionMode mode) {
    if (obs.size() != obs_dim_) throw ShapeError("select_action: observation size mismatch");
    const Eigen::VectorXd out = actor_.forward(obs);
    Eigen::RowVectorXd mu(1), ls(1), eps(1);
    mu[0] = out[0];
    ls[0] = out[1];
    eps[0] = mode == ActionMode::stochastic ? standard_normal(policy_rng_) : 0.0;
    return nn::sample_squashed(mu, ls, eps, hyper_.bounds).action[0];
  }

  /// Deterministic actions for a batch of observations (columns).
  Eigen::RowVectorXd mean_actions(const Eigen::MatrixXd& obs) const {
    const Eigen::MatrixXd out = actor_.forward(obs);
    return nn::sample_squashed(out.row(0), out.row(1), Eigen::RowVectorXd::Zero(obs.cols()), hyper_.bounds)
        .action;
  }

  /// Policy draw for a batch with explicit noise.
  nn::SquashedSample policy(const Eigen::MatrixXd& obs, const Eigen::RowVectorXd& eps) const {
    const Eigen::MatrixXd out = actor_.forward(obs);
    return nn::sample_squashed(out.row(0), out.row(1), eps, hyper_.bounds);
  }

  static Eigen::MatrixXd critic_input(const Eigen::MatrixXd& s, const Eigen::RowVectorXd& a) {
    Eigen::MatrixXd x(s.rows() + 1, s.cols());
    x.topRows(s.rows()) = s;
    x.row(s.rows()) = a;
    return x;
  }

  /// y = r + γ(1 − done)(min_k Q̂_k(s', a') − α log π(a'|s')), a' drawn with noise eps.
  Eigen::RowVectorXd bellman_targets(const Batch& b, const Eigen::RowVectorXd& eps) const {
    const auto next = policy(b.s_next, eps);
    const Eigen::MatrixXd x = critic_input(b.s_next, next.action);
    const Eigen::RowVectorXd q1 = targets_[0].forward(x).row(0);
    const Eigen::RowVectorXd q2 = targets_[1].forward(x).row(0);
    const Eigen::RowVectorXd v = q1.cwiseMin(q2) - alpha() * next.log_prob;
    return b.r + hyper_.gamma * (1.0 - b.done.array()).matrix().cwiseProduct(v);
  }

  /// One regression step of both critics toward the shared soft target.
  double critic_update(const Batch& b) {
    check_batch(b);
    const Eigen::RowVectorXd y = bellman_targets(b, noise(b.size()));
    const Eigen::MatrixXd x = critic_input(b.s, b.a);
    const double n = static_cast<double>(b.size());
    for (std::size_t k = 0; k < 2; ++k) {
      nn::Tape tape;
      const Eigen::RowVectorXd delta = critics_[k].forward(x, tape).row(0) - y;
      last_losses_[k] = delta.squaredNorm() / n;
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(critics_[k].num_params());
      critics_[k].backward(tape, Eigen::MatrixXd(2.0 / n * delta), &grad, nullptr);
      critic_opt_[k].step(critics_[k].mutable_params(), grad);
    }
    return 0.5 * (last_losses_[0] + last_losses_[1]);
  }

  /// Elementwise min over both critics with the derivative of the minimizer.
  CriticEval min_critic(const Eigen::MatrixXd& s, const Eigen::RowVectorXd& a) const {
    const Eigen::MatrixXd x = critic_input(s, a);
    std::array<nn::Tape, 2> tapes;
    const Eigen::RowVectorXd q1 = critics_[0].forward(x, tapes[0]).row(0);
    const Eigen::RowVectorXd q2 = critics_[1].forward(x, tapes[1]).row(0);
    const Eigen::RowVectorXd pick1 = (q1.array() <= q2.array()).cast<double>().matrix();
    CriticEval out;
    out.q = q1.cwiseMin(q2);
    out.dq_da = Eigen::RowVectorXd::Zero(s.cols());
    Eigen::MatrixXd dx;
    critics_[0].backward(tapes[0], Eigen::MatrixXd(pick1), nullptr, &dx);
    out.dq_da += dx.row(s.rows());
    critics_[1].backward(tapes[1], Eigen::MatrixXd(Eigen::RowVectorXd::Ones(s.cols()) - pick1), nullptr, &dx);
    out.dq_da += dx.row(s.rows());
    return out;
  }

  /// Loss E[α log π(a|s) − Q(s, a)] and its gradient with respect to the actor
  /// parameters, for actions reparameterized with noise eps.
  template <class Critic>
  std::pair<double, Eigen::VectorXd> actor_loss_grad(const Batch& b, const Eigen::RowVectorXd& eps,
                                                     Critic&& critic) const {
    nn::Tape tape;
    const Eigen::MatrixXd out = actor_.forward(b.s, tape);
    const auto smp = nn::sample_squashed(out.row(0), out.row(1), eps, hyper_.bounds);
    const CriticEval q = critic(b.s, smp.action);
    const double n = static_cast<double>(b.size());
    const double a = alpha();
    const double loss = (a * smp.log_prob - q.q).sum() / n;
    Eigen::MatrixXd dy(2, b.size());
    dy.row(0) = (a * smp.dlogp_dmu - q.dq_da.cwiseProduct(smp.da_dmu)) / n;
    dy.row(1) = (a * smp.dlogp_dls - q.dq_da.cwiseProduct(smp.da_dls)) / n;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(actor_.num_params());
    actor_.backward(tape, dy, &grad, nullptr);
    return {loss, std::move(grad)};
  }

  /// One policy step against an arbitrary critic; critics are not touched.
  template <class Critic>
  double actor_update(const Batch& b, Critic&& critic) {
    check_batch(b);
    auto [loss, grad] = actor_loss_grad(b, noise(b.size()), std::forward<Critic>(critic));
    actor_opt_.step(actor_.mutable_params(), grad);
    return loss;
  }

  double actor_update(const Batch& b) {
    return actor_update(b, [this](const Eigen::MatrixXd& s, const Eigen::RowVectorXd& a) {
      return min_critic(s, a);
    });
  }

  /// Gradient of E[−α(log π + H)] with respect to log α.
  double temperature_gradient(const Eigen::RowVectorXd& log_prob) const {
    return -alpha() * (log_prob.array() + hyper_.target_entropy).mean();
  }

  /// One step on log α from freshly sampled log-densities; returns the new α.
  double temperature_update(const Batch& b) {
    check_batch(b);
    const auto smp = policy(b.s, noise(b.size()));
    Eigen::VectorXd p(1), g(1);
    p[0] = log_alpha_;
    g[0] = temperature_gradient(smp.log_prob);
    alpha_opt_.step(p, g);
    log_alpha_ = p[0];
    return alpha();
  }

  /// Gradient rounds after an episode that stored `steps` transitions.
  /// Returns the number of rounds run (0 when the buffer is below one batch).
  int end_episode_updates(int steps) {
    if (buffer_.size() < hyper_.batch) return 0;
    const int rounds = hyper_.updates_per_episode > 0 ? hyper_.updates_per_episode : steps;
    for (int i = 0; i < rounds; ++i) {
      const Batch b = buffer_.sample(hyper_.batch, update_rng_);
      critic_update(b);
      actor_update(b);
      temperature_update(b);
      for (std::size_t k = 0; k < 2; ++k) nn::polyak_update(targets_[k], critics_[k], hyper_.tau);
    }
    return rounds;
  }

  Snapshot export_params() const { return {actor_, critics_[0], critics_[1]}; }

  /// Overwrites actor and critics; α, optimizer moments and the buffer stay.
  void import_params(const Snapshot& s, bool reset_targets) {
    auto same = [](const nn::DenseNet& a, const nn::DenseNet& b) { return a.sizes() == b.sizes(); };
    if (!same(s.actor, actor_) || !same(s.critic1, critics_[0]) || !same(s.critic2, critics_[1])) {
      throw ShapeError("import_params: snapshot shapes do not match the agent");
    }
    actor_.set_params(s.actor.params());
    critics_[0].set_params(s.critic1.params());
    critics_[1].set_params(s.critic2.params());
    if (reset_targets) targets_ = critics_;
  }

  /// actor.ckpt, critic1.ckpt, critic2.ckpt and log_alpha.txt in `dir`.
  void save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    nn::save_net(dir / "actor.ckpt", actor_);
    nn::save_net(dir / "critic1.ckpt", critics_[0]);
    nn::save_net(dir / "critic2.ckpt", critics_[1]);
    std::ofstream out(dir / "log_alpha.txt", std::ios::binary | std::ios::trunc);
    out << csv::format_number(log_alpha_) << '\n';
  }

  void load(const std::filesystem::path& dir) {
    import_params({nn::load_net(dir / "actor.ckpt"), nn::load_net(dir / "critic1.ckpt"),
                   nn::load_net(dir / "critic2.ckpt")},
                  true);
    std::ifstream in(dir / "log_alpha.txt");
    std::string line;
    if (!std::getline(in, line)) throw ParseError("missing " + (dir / "log_alpha.txt").string());
    log_alpha_ = csv::parse_double(csv::trim(line), "log_alpha");
  }

 private:
  Eigen::RowVectorXd noise(Eigen::Index n) {
    Eigen::RowVectorXd e(n);
    for (Eigen::Index i = 0; i < n; ++i) e[i] = standard_normal(update_rng_);
    return e;
  }

  void check_batch(const Batch& b) const {
    if (b.size() < 1) throw InsufficientDataError("empty batch");
    if (b.s.rows() != obs_dim_ || b.s_next.rows() != obs_dim_) {
      throw ShapeError("batch observation size mismatch");
    }
  }

  int obs_dim_;
  SACHyper hyper_;
  ReplayBuffer buffer_;
  Rng policy_rng_;
  Rng update_rng_;
  nn::DenseNet actor_;
  std::array<nn::DenseNet, 2> critics_;
  std::array<nn::DenseNet, 2> targets_;
  nn::Adam actor_opt_;
  std::array<nn::Adam, 2> critic_opt_;
  double log_alpha_ = 0.0;
  nn::Adam alpha_opt_;
  std::array<double, 2> last_losses_{0.0, 0.0};
};

}  // namespace fedsac::sac
