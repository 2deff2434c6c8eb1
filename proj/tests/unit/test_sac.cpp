#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "fedsac/sac/agent.hpp"
#include "fedsac/sac/replay_buffer.hpp"
#include "sac_oracles.hpp"

using namespace fedsac;
using namespace fedsac::sac;

namespace {

SACHyper small_hyper() {
  SACHyper h;
  h.actor_hidden = {16, 16};
  h.critic_hidden = {16, 16};
  h.batch = 8;
  h.buffer_capacity = 100;
  return h;
}

Transition random_transition(Rng& rng, int dim, bool done = false) {
  Eigen::VectorXd s(dim), s2(dim);
  for (int i = 0; i < dim; ++i) {
    s[i] = standard_normal(rng);
    s2[i] = standard_normal(rng);
  }
  return {s, uniform(rng, -0.2, 1.0), standard_normal(rng), s2, done};
}

void fill(SACAgent& agent, int n, std::uint64_t seed) {
  Rng rng = make_rng(seed, "fill");
  for (int i = 0; i < n; ++i) agent.remember(random_transition(rng, agent.obs_dim(), i % 5 == 4));
}

/// Sets a network to output the constant c (zero weights, bias c on the output).
void make_constant(nn::DenseNet& net, double c) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(net.num_params());
  p[net.bias_offset(net.num_layers() - 1)] = c;
  net.set_params(p);
}

}  // namespace

TEST(ReplayBuffer, RingDropsOldest) {
  ReplayBuffer buf(2, 5);
  for (int i = 0; i < 8; ++i) {
    buf.add({Eigen::Vector2d(i, 0), 0.0, double(i), Eigen::Vector2d(i, 1), false});
  }
  EXPECT_EQ(buf.size(), 5);
  EXPECT_EQ(buf.inserted(), 8);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(buf.at(i).r, double(i + 3));
  EXPECT_THROW(buf.at(5), RangeError);
}

TEST(ReplayBuffer, SampleNeedsEnough) {
  ReplayBuffer buf(1, 10);
  Rng rng(1);
  buf.add({Eigen::VectorXd::Zero(1), 0.0, 0.0, Eigen::VectorXd::Zero(1), false});
  EXPECT_THROW(buf.sample(2, rng), InsufficientDataError);
  EXPECT_EQ(buf.sample(1, rng).size(), 1);
  EXPECT_THROW(buf.add({Eigen::VectorXd::Zero(2), 0.0, 0.0, Eigen::VectorXd::Zero(1), false}), ShapeError);
  EXPECT_THROW(buf.add({Eigen::VectorXd::Zero(1), NAN, 0.0, Eigen::VectorXd::Zero(1), false}), RangeError);
}

TEST(ReplayBuffer, SamplesAreStoredTransitions) {
  ReplayBuffer buf(1, 4);
  for (int i = 0; i < 4; ++i) buf.add({Eigen::VectorXd::Constant(1, i), i * 0.1, i * 10.0, Eigen::VectorXd::Constant(1, -i), i == 3});
  Rng rng(2);
  for (int draw = 0; draw < 25; ++draw) {
    const Batch b = buf.sample(4, rng);
    for (int j = 0; j < 4; ++j) {
    const int i = static_cast<int>(b.s(0, j));
    ASSERT_EQ(b.r[j], i * 10.0);
    ASSERT_EQ(b.s_next(0, j), -i);
    ASSERT_EQ(b.done[j], i == 3 ? 1.0 : 0.0);
    }
  }
}

TEST(SACAgent, ActionsWithinBounds) {
  SACAgent agent(6, small_hyper(), 3);
  Rng rng = make_rng(3, "obs");
  for (int i = 0; i < 10000; ++i) {
    Eigen::VectorXd obs(6);
    for (int j = 0; j < 6; ++j) obs[j] = 3.0 * standard_normal(rng);
    const double a = agent.select_action(obs, ActionMode::stochastic);
    ASSERT_GE(a, -0.2);
    ASSERT_LE(a, 1.0);
  }
  const double d = agent.select_action(Eigen::VectorXd::Zero(6), ActionMode::deterministic);
  EXPECT_GT(d, -0.2);
  EXPECT_LT(d, 1.0);
}

TEST(SACAgent, SameSeedSameStochasticAction) {
  SACAgent a(6, small_hyper(), 9), b(6, small_hyper(), 9);
  const Eigen::VectorXd obs = Eigen::VectorXd::LinSpaced(6, -1, 1);
  for (int i = 0; i < 10; ++i) {
    ASSERT_EQ(a.select_action(obs, ActionMode::stochastic), b.select_action(obs, ActionMode::stochastic));
  }
}

TEST(SACAgent, ZeroDiscountTargetIsReward) {
  SACHyper h = small_hyper();
  h.gamma = 0.0;
  SACAgent agent(3, h, 4);
  fill(agent, 50, 4);
  Rng rng(5);
  const Batch b = agent.buffer().sample(20, rng);
  const Eigen::RowVectorXd y = agent.bellman_targets(b, Eigen::RowVectorXd::Ones(20));
  EXPECT_EQ(y, b.r);
}

TEST(SACAgent, ZeroDiscountConvergesToReward) {
  SACHyper h = small_hyper();
  h.gamma = 0.0;
  h.lr_q = 1e-3;
  SACAgent agent(3, h, 6);
  const Transition t{Eigen::Vector3d(0.3, -0.5, 1.0), 0.45, -2.5, Eigen::Vector3d(1, 1, 1), false};
  const Batch b = make_batch({t});
  for (int i = 0; i < 3000; ++i) agent.critic_update(b);
  for (int k = 0; k < 2; ++k) {
    const double q = agent.critic(k).forward(SACAgent::critic_input(b.s, b.a))(0, 0);
    EXPECT_NEAR(q, -2.5, 1e-3);
  }
}

TEST(SACAgent, IdenticalTwinsHaveIdenticalLosses) {
  SACAgent agent(4, small_hyper(), 7);
  agent.mutable_critic(1).set_params(agent.critic(0).params());
  agent.mutable_target(1).set_params(agent.target(0).params());
  fill(agent, 40, 7);
  Rng rng(8);
  for (int i = 0; i < 5; ++i) {
    agent.critic_update(agent.buffer().sample(8, rng));
    ASSERT_NEAR(agent.last_critic_losses()[0], agent.last_critic_losses()[1], 1e-12);
  }
}

TEST(SACAgent, BellmanTargetUsesSmallerTwin) {
  SACHyper h = small_hyper();
  h.gamma = 0.9;
  SACAgent agent(3, h, 10);
  make_constant(agent.mutable_target(0), 2.0);
  make_constant(agent.mutable_target(1), 5.0);
  fill(agent, 20, 10);
  Rng rng(11);
  const Batch b = agent.buffer().sample(16, rng);
  const Eigen::RowVectorXd eps = Eigen::RowVectorXd::LinSpaced(16, -1.5, 1.5);
  const Eigen::RowVectorXd y = agent.bellman_targets(b, eps);
  const auto next = agent.policy(b.s_next, eps);
  for (int j = 0; j < 16; ++j) {
    const double v = 2.0 - agent.alpha() * next.log_prob[j];
    ASSERT_NEAR(y[j], b.r[j] + 0.9 * (1.0 - b.done[j]) * v, 1e-12);
  }
  // Swapping which twin is smaller changes nothing.
  make_constant(agent.mutable_target(0), 5.0);
  make_constant(agent.mutable_target(1), 2.0);
  EXPECT_LE((agent.bellman_targets(b, eps) - y).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SACAgent, ActorObjectiveUsesSmallerTwin) {
  SACAgent agent(3, small_hyper(), 12);
  make_constant(agent.mutable_critic(0), -1.0);
  make_constant(agent.mutable_critic(1), 4.0);
  const auto states = oracles::random_states(3, 10, 12);
  const auto q = agent.min_critic(states.s, Eigen::RowVectorXd::Constant(10, 0.5));
  for (int j = 0; j < 10; ++j) EXPECT_EQ(q.q[j], -1.0);
}

TEST(SACAgent, TwoStateMdpMatchesSoftEvaluation) {
  const auto r = oracles::two_state_mdp(13);
  EXPECT_LE(r.max_rel_error, 0.02) << "exact\n" << r.exact << "\nlearned\n" << r.learned;
}

TEST(SACAgent, QuadraticBanditConverges) {
  EXPECT_LE(oracles::quadratic_bandit_error(14), 0.02);
}

TEST(SACAgent, EntropyAscentWithZeroCritic) {
  SACHyper h = oracles::bandit_hyper();
  SACAgent agent(4, h, 15);
  // Start in the narrow regime where squashed entropy grows with σ.
  auto& p = agent.mutable_actor().mutable_params();
  p[agent.actor().bias_offset(agent.actor().num_layers() - 1) + 1] = -2.0;
  const auto batch = oracles::random_states(4, 64, 15);
  auto zero = [](const Eigen::MatrixXd& s, const Eigen::RowVectorXd&) {
    return CriticEval{Eigen::RowVectorXd::Zero(s.cols()), Eigen::RowVectorXd::Zero(s.cols())};
  };
  auto mean_sigma = [&] {
    const Eigen::MatrixXd out = agent.actor().forward(batch.s);
    return out.row(1).array().exp().mean();
  };
  double last = mean_sigma();
  for (int i = 0; i < 50; ++i) {
    agent.actor_update(batch, zero);
    const double now = mean_sigma();
    ASSERT_GT(now, last) << "step " << i;
    last = now;
  }
}

TEST(SACAgent, ActorGradientMatchesFiniteDifferences) {
  SACHyper h = small_hyper();
  h.init_alpha = 0.7;
  SACAgent agent(5, h, 16);
  fill(agent, 30, 16);
  Rng rng(17);
  const Batch b = agent.buffer().sample(12, rng);
  Eigen::RowVectorXd eps(12);
  for (int j = 0; j < 12; ++j) eps[j] = standard_normal(rng);
  auto smooth = [](const Eigen::MatrixXd&, const Eigen::RowVectorXd& a) {
    const Eigen::RowVectorXd d = (a.array() - 0.3).matrix();
    return CriticEval{(-d.cwiseAbs2().array() + 0.5 * a.array().cube()).matrix(),
                      (-2.0 * d.array() + 1.5 * a.array().square()).matrix()};
  };
  auto twin = [&agent](const Eigen::MatrixXd& s, const Eigen::RowVectorXd& a) { return agent.min_critic(s, a); };
  for (int which = 0; which < 2; ++which) {
    const auto grad = which == 0 ? agent.actor_loss_grad(b, eps, smooth).second
                                 : agent.actor_loss_grad(b, eps, twin).second;
    double worst = 0.0;
    const double step = 1e-6;
    for (Eigen::Index i = 0; i < agent.actor().num_params(); i += 3) {
      const double keep = agent.actor().params()[i];
      agent.mutable_actor().mutable_params()[i] = keep + step;
      const double lp = which == 0 ? agent.actor_loss_grad(b, eps, smooth).first
                                   : agent.actor_loss_grad(b, eps, twin).first;
      agent.mutable_actor().mutable_params()[i] = keep - step;
      const double lm = which == 0 ? agent.actor_loss_grad(b, eps, smooth).first
                                   : agent.actor_loss_grad(b, eps, twin).first;
      agent.mutable_actor().mutable_params()[i] = keep;
      const double fd = (lp - lm) / (2 * step);
      worst = std::max(worst, std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-4}));
    }
    EXPECT_LE(worst, 1e-3) << (which == 0 ? "smooth critic" : "twin critic");
  }
}

TEST(SACAgent, TemperatureStationaryAtTargetEntropy) {
  SACAgent agent(3, small_hyper(), 18);
  EXPECT_EQ(agent.temperature_gradient(Eigen::RowVectorXd::Constant(7, 1.0)), 0.0);
  EXPECT_LT(agent.temperature_gradient(Eigen::RowVectorXd::Constant(7, 3.0)), 0.0);
  EXPECT_GT(agent.temperature_gradient(Eigen::RowVectorXd::Constant(7, -1.0)), 0.0);
}

TEST(SACAgent, TemperatureRisesForNarrowPolicy) {
  SACAgent agent(3, small_hyper(), 19);
  auto& p = agent.mutable_actor().mutable_params();
  p[agent.actor().bias_offset(agent.actor().num_layers() - 1) + 1] = -6.0;
  fill(agent, 20, 19);
  const double before = agent.alpha();
  Rng rng(20);
  const double after = agent.temperature_update(agent.buffer().sample(8, rng));
  EXPECT_GT(after, before);
}

TEST(SACAgent, TemperatureSettlesEntropyOnBandit) {
  SACHyper h = oracles::bandit_hyper();
  h.lr_alpha = 3e-3;
  h.init_alpha = 0.05;
  SACAgent agent(4, h, 21);
  const auto batch = oracles::random_states(4, 64, 21);
  for (int i = 0; i < 4000; ++i) {
    agent.actor_update(batch, oracles::quadratic_critic);
    agent.temperature_update(batch);
  }
  Rng rng(22);
  double sum = 0.0;
  const int draws = 200;
  for (int k = 0; k < draws; ++k) {
    Eigen::RowVectorXd eps(64);
    for (int j = 0; j < 64; ++j) eps[j] = standard_normal(rng);
    sum += agent.policy(batch.s, eps).log_prob.mean();
  }
  const double entropy = -sum / draws;
  EXPECT_NEAR(entropy, h.target_entropy, 0.2) << "alpha " << agent.alpha();
}

TEST(SACAgent, AlphaStaysPositive) {
  SACHyper h = small_hyper();
  h.lr_alpha = 0.5;
  SACAgent agent(3, h, 23);
  fill(agent, 20, 23);
  Rng rng(24);
  for (int i = 0; i < 500; ++i) {
    agent.temperature_update(agent.buffer().sample(8, rng));
    ASSERT_GT(agent.alpha(), 0.0);
    ASSERT_TRUE(std::isfinite(agent.alpha()));
  }
}

TEST(SACAgent, EndEpisodeNoOpBelowBatch) {
  SACAgent agent(3, small_hyper(), 25);
  fill(agent, 5, 25);
  const auto before = agent.export_params();
  EXPECT_EQ(agent.end_episode_updates(10), 0);
  EXPECT_EQ(agent.actor().params(), before.actor.params());
  EXPECT_EQ(agent.critic(0).params(), before.critic1.params());
}

TEST(SACAgent, FullTauCopiesCritics) {
  SACHyper h = small_hyper();
  h.tau = 1.0;
  SACAgent agent(3, h, 26);
  fill(agent, 30, 26);
  EXPECT_EQ(agent.end_episode_updates(3), 3);
  EXPECT_EQ(agent.target(0).params(), agent.critic(0).params());
  EXPECT_EQ(agent.target(1).params(), agent.critic(1).params());
}

TEST(SACAgent, TargetMovesByTauFraction) {
  SACHyper h = small_hyper();
  h.tau = 0.05;
  h.updates_per_episode = 1;
  SACAgent agent(3, h, 27);
  fill(agent, 30, 27);
  const Eigen::VectorXd old_target = agent.target(0).params();
  agent.end_episode_updates(10);
  const Eigen::VectorXd delta = agent.target(0).params() - old_target;
  const Eigen::VectorXd gap = agent.critic(0).params() - old_target;
  EXPECT_LE(delta.norm(), h.tau * gap.norm() + 1e-12);
  EXPECT_LE((delta - h.tau * gap).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SACAgent, UpdatesLeaveStoredTransitionsIntact) {
  SACAgent agent(3, small_hyper(), 28);
  fill(agent, 30, 28);
  std::vector<Transition> before;
  for (int i = 0; i < agent.buffer().size(); ++i) before.push_back(agent.buffer().at(i));
  agent.end_episode_updates(5);
  for (int i = 0; i < agent.buffer().size(); ++i) {
    const Transition t = agent.buffer().at(i);
    ASSERT_EQ(t.s, before[i].s);
    ASSERT_EQ(t.a, before[i].a);
    ASSERT_EQ(t.r, before[i].r);
  }
}

TEST(SACAgent, DeterministicTrajectories) {
  SACAgent a(3, small_hyper(), 29), b(3, small_hyper(), 29);
  fill(a, 30, 29);
  fill(b, 30, 29);
  a.end_episode_updates(6);
  b.end_episode_updates(6);
  EXPECT_EQ(a.actor().params(), b.actor().params());
  EXPECT_EQ(a.critic(1).params(), b.critic(1).params());
  EXPECT_EQ(a.target(0).params(), b.target(0).params());
  EXPECT_EQ(a.log_alpha(), b.log_alpha());
}

TEST(SACAgent, ExportImportRoundTrip) {
  SACAgent src(3, small_hyper(), 30);
  fill(src, 30, 30);
  src.end_episode_updates(4);
  const Eigen::VectorXd obs = Eigen::Vector3d(0.1, 0.2, -0.3);
  const double want = src.select_action(obs, ActionMode::deterministic);
  src.import_params(src.export_params(), false);
  EXPECT_EQ(src.select_action(obs, ActionMode::deterministic), want);

  SACAgent fresh(3, small_hyper(), 31);
  const Eigen::VectorXd target_before = fresh.target(0).params();
  const double alpha_before = fresh.alpha();
  fresh.import_params(src.export_params(), false);
  EXPECT_EQ(fresh.select_action(obs, ActionMode::deterministic), want);
  EXPECT_EQ(fresh.target(0).params(), target_before);
  EXPECT_EQ(fresh.alpha(), alpha_before);
  fresh.import_params(src.export_params(), true);
  EXPECT_EQ(fresh.target(0).params(), src.critic(0).params());

  SACHyper other = small_hyper();
  other.actor_hidden = {8};
  SACAgent wrong(3, other, 32);
  EXPECT_THROW(wrong.import_params(src.export_params(), true), ShapeError);
}

TEST(SACAgent, SaveLoadRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "fedsac_sac_ckpt";
  std::filesystem::remove_all(dir);
  SACAgent src(3, small_hyper(), 33);
  src.set_log_alpha(-0.75);
  src.save(dir);
  SACAgent dst(3, small_hyper(), 34);
  dst.load(dir);
  EXPECT_EQ(dst.actor().params(), src.actor().params());
  EXPECT_EQ(dst.critic(1).params(), src.critic(1).params());
  EXPECT_EQ(dst.log_alpha(), -0.75);
  std::filesystem::remove_all(dir);
}

TEST(SACHyper, Validation) {
  SACHyper h;
  EXPECT_NO_THROW(h.validate());
  h.gamma = 1.5;
  EXPECT_THROW(h.validate(), RangeError);
  h = SACHyper{};
  h.tau = 0.0;
  EXPECT_THROW(h.validate(), RangeError);
  h = SACHyper{};
  h.batch = 0;
  EXPECT_THROW(h.validate(), RangeError);
  h = SACHyper{};
  h.lr_alpha = -1.0;
  EXPECT_THROW(SACAgent(3, h, 1), RangeError);
}
