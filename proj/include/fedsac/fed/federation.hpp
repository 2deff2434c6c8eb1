#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Core>

#include "fedsac/core/error.hpp"
#include "fedsac/core/random.hpp"
#include "fedsac/env/fleet_env.hpp"
#include "fedsac/nn/checkpoint.hpp"
#include "fedsac/sac/agent.hpp"

namespace fedsac::fed {

struct RoundConfig {
  int n_clients = 30;
  int episodes_per_round = 300;
  int global_epochs = 6;
  std::uint64_t seed = 0;
  std::string aggregation = "mean";
  bool federate = true;  ///< false: clients train in isolation (no aggregation or broadcast)
  int threads = 1;       ///< workers for the per-client gradient updates
  std::optional<std::filesystem::path> exchange_dir;

  void validate() const {
    if (n_clients < 1) throw RangeError("fed.n_clients must be >= 1");
    if (episodes_per_round < 0) throw RangeError("fed.episodes_per_round must be >= 0");
    if (global_epochs < 1) throw RangeError("fed.global_epochs must be >= 1");
    if (aggregation != "mean") throw RangeError("fed.aggregation: unknown rule '" + aggregation + "'");
    if (threads < 1) throw RangeError("fed.threads must be >= 1");
  }
};

struct GlobalModel {
  sac::Snapshot params;
  int round = 0;
  std::vector<std::string> client_digests;
};

struct EpisodeMetrics {
  int epoch = 0;
  long episode = 0;
  int client = 0;
  double r_p = 0.0;  ///< λ-weighted components; they add up to r_sum
  double r_a = 0.0;
  double r_g = 0.0;
  double r_sum = 0.0;
};

using MetricsSink = std::function<void(const EpisodeMetrics&)>;

/// A round failed; the last completed global model is attached.
class RoundFailure : public Error {
 public:
  RoundFailure(const std::string& what, std::optional<GlobalModel> last)
      : Error(what), last_completed(std::move(last)) {}
  std::optional<GlobalModel> last_completed;
};

/// FNV-1a 64 of the snapshot's checkpoint text, as hex.
inline std::string digest(const sac::Snapshot& s) {
  const std::string text = nn::to_text(s.to_bundle());
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace detail {

/// Elementwise mean; each element's values are sorted before summation so
/// client order cannot change the result.
inline Eigen::VectorXd sorted_mean(const std::vector<const Eigen::VectorXd*>& xs) {
  const Eigen::Index n = xs.front()->size();
  for (const auto* x : xs) {
    if (x->size() != n) throw ShapeError("aggregate: parameter vectors differ in length");
  }
  Eigen::VectorXd out(n);
  std::vector<double> col(xs.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < xs.size(); ++k) col[k] = (*xs[k])[i];
    std::sort(col.begin(), col.end());
    if (col.front() == col.back()) {
      out[i] = col.front();
      continue;
    }
    double sum = 0.0;
    for (double v : col) sum += v;
    out[i] = sum / static_cast<double>(xs.size());
  }
  return out;
}

inline nn::DenseNet mean_net(const std::vector<const nn::DenseNet*>& nets) {
  std::vector<const Eigen::VectorXd*> ps;
  for (const auto* n : nets) {
    if (n->sizes() != nets.front()->sizes()) throw ShapeError("aggregate: network shapes differ");
    ps.push_back(&n->params());
  }
  nn::DenseNet out = *nets.front();
  out.set_params(sorted_mean(ps));
  return out;
}

}  // namespace detail

/// Federated averaging of actor and both critics, independently.
inline sac::Snapshot aggregate(std::span<const sac::Snapshot> snaps) {
  if (snaps.empty()) throw ShapeError("aggregate: no snapshots");
  std::vector<const nn::DenseNet*> a, c1, c2;
  for (const auto& s : snaps) {
    a.push_back(&s.actor);
    c1.push_back(&s.critic1);
    c2.push_back(&s.critic2);
  }
  return {detail::mean_net(a), detail::mean_net(c1), detail::mean_net(c2)};
}

/// Every client takes the global actor and critics; targets follow the critics.
inline void broadcast(const GlobalModel& g, std::span<sac::SACAgent> clients) {
  for (auto& c : clients) c.import_params(g.params, true);
}

/// Per-client totals of one episode.
struct EpisodeTotals {
  std::vector<EpisodeMetrics> per_client;
  std::vector<int> stored;  ///< transitions stored per client
};

/// Plays the current day to its end. `act(i, obs)` supplies the rate of
/// plugged EV i; when `learners` is non-empty every active slot is stored in
/// the matching agent's buffer.
template <class Act>
EpisodeTotals play_day(env::FleetEnv& env, Act&& act, std::span<sac::SACAgent> learners,
                       const std::function<void(const env::JointStepResult&)>& on_step = {}) {
  const int n = env.n_evs();
  const auto& w = env.config().weights;
  EpisodeTotals tot;
  tot.per_client.resize(static_cast<std::size_t>(n));
  tot.stored.assign(static_cast<std::size_t>(n), 0);
  std::vector<double> actions(static_cast<std::size_t>(n));
  std::vector<Eigen::VectorXd> obs(static_cast<std::size_t>(n));
  while (!env.day_over()) {
    for (int i = 0; i < n; ++i) {
      actions[i] = 0.0;
      if (env.plugged(i)) {
        obs[i] = env.observe(i).vector();
        actions[i] = act(i, obs[i]);
      }
    }
    const auto res = env.joint_step(actions);
    for (int i = 0; i < n; ++i) {
      const auto& st = res.evs[i];
      if (!st.active) continue;
      auto& m = tot.per_client[i];
      m.client = i;
      m.r_p += w.lambda_p * st.r_p;
      m.r_a += w.lambda_a * st.r_a;
      m.r_g += w.lambda_g * st.r_g;
      m.r_sum += st.r;
      if (!learners.empty()) {
        learners[i].remember({obs[i], st.action, st.r, st.next.vector(), st.done});
        ++tot.stored[i];
      }
    }
    if (on_step) on_step(res);
  }
  return tot;
}

/// FedSAC: lockstep local rounds in one shared environment, then averaging
/// and broadcast, for the configured number of global epochs.
class Federation {
 public:
  Federation(env::FleetEnv& env, const sac::SACHyper& hyper, RoundConfig cfg)
      : env_(env), cfg_(std::move(cfg)) {
    cfg_.validate();
    if (cfg_.n_clients != env_.n_evs()) {
      throw ShapeError("fed.n_clients must equal the number of EVs in the environment");
    }
    for (int i = 0; i < cfg_.n_clients; ++i) {
      clients_.emplace_back(env_.obs_dim(), hyper, derive_seed(cfg_.seed, "client", {static_cast<std::uint64_t>(i)}));
    }
    if (cfg_.federate) {
      // Common starting point for all clients.
      GlobalModel g{clients_.front().export_params(), 0, {}};
      broadcast(g, clients_);
    }
  }

  const RoundConfig& config() const noexcept { return cfg_; }
  std::vector<sac::SACAgent>& clients() noexcept { return clients_; }
  const std::vector<sac::SACAgent>& clients() const noexcept { return clients_; }
  env::FleetEnv& env() noexcept { return env_; }

  /// Trains every client for `episodes` lockstep episodes of round `epoch`;
  /// returns the exported snapshots.
  std::vector<sac::Snapshot> run_local_round(int epoch, int episodes, const MetricsSink& sink = {}) {
    for (int e = 0; e < episodes; ++e) {
      const long episode = static_cast<long>(epoch) * cfg_.episodes_per_round + e;
      env_.reset_training_day(derive_seed(cfg_.seed, "episode", {static_cast<std::uint64_t>(epoch),
                                                                 static_cast<std::uint64_t>(e)}));
      auto act = [this](int i, const Eigen::VectorXd& o) {
        return clients_[i].select_action(o, sac::ActionMode::stochastic);
      };
      const EpisodeTotals tot = play_day(env_, act, clients_);
      update_all(tot.stored);
      if (sink) {
        for (auto m : tot.per_client) {
          m.epoch = epoch;
          m.episode = episode;
          sink(m);
        }
      }
    }
    std::vector<sac::Snapshot> out;
    for (const auto& c : clients_) out.push_back(c.export_params());
    return out;
  }

  /// Full training. `on_round` sees each completed global model.
  GlobalModel train(const MetricsSink& sink = {},
                    const std::function<void(const GlobalModel&)>& on_round = {}) {
    std::optional<GlobalModel> last;
    for (int epoch = 0; epoch < cfg_.global_epochs; ++epoch) {
      try {
        auto snaps = run_local_round(epoch, cfg_.episodes_per_round, sink);
        if (cfg_.exchange_dir) snaps = exchange(epoch, snaps);
        pre_aggregation_ = snaps;
        GlobalModel g{aggregate(snaps), epoch + 1, {}};
        for (const auto& s : snaps) g.client_digests.push_back(digest(s));
        if (cfg_.federate) broadcast(g, clients_);
        if (cfg_.exchange_dir) {
          nn::save_bundle(*cfg_.exchange_dir / ("round" + std::to_string(epoch + 1) + "_global.ckpt"),
                          g.params.to_bundle());
        }
        last = g;
        if (on_round) on_round(g);
      } catch (const RoundFailure&) {
        throw;
      } catch (const std::exception& e) {
        throw RoundFailure("round " + std::to_string(epoch + 1) + " failed: " + e.what(), last);
      }
    }
    return *last;
  }

  /// Client uploads of the most recent round, before averaging.
  const std::vector<sac::Snapshot>& pre_aggregation() const noexcept { return pre_aggregation_; }

 private:
  /// Uploads through files: each client writes round<k>_client<i>.ckpt, the
  /// server reads them back.
  std::vector<sac::Snapshot> exchange(int epoch, const std::vector<sac::Snapshot>& snaps) {
    std::filesystem::create_directories(*cfg_.exchange_dir);
    std::vector<sac::Snapshot> back;
    for (std::size_t i = 0; i < snaps.size(); ++i) {
      const auto path = *cfg_.exchange_dir /
                        ("round" + std::to_string(epoch + 1) + "_client" + std::to_string(i) + ".ckpt");
      nn::save_bundle(path, snaps[i].to_bundle());
      back.push_back(sac::Snapshot::from_bundle(nn::load_bundle(path)));
    }
    return back;
  }

  void update_all(const std::vector<int>& stored) {
    const int n = static_cast<int>(clients_.size());
    const int workers = std::min(cfg_.threads, n);
    if (workers <= 1) {
      for (int i = 0; i < n; ++i) clients_[i].end_episode_updates(stored[i]);
      return;
    }
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (int i = w; i < n; i += workers) clients_[i].end_episode_updates(stored[i]);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  env::FleetEnv& env_;
  RoundConfig cfg_;
  std::vector<sac::SACAgent> clients_;
  std::vector<sac::Snapshot> pre_aggregation_;
};

}  // namespace fedsac::fed
