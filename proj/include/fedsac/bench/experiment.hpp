#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fedsac/bench/config.hpp"
#include "fedsac/core/csv.hpp"
#include "fedsac/core/error.hpp"
#include "fedsac/core/random.hpp"
#include "fedsac/env/fleet_env.hpp"
#include "fedsac/env/prices.hpp"
#include "fedsac/fed/federation.hpp"
#include "fedsac/nn/checkpoint.hpp"
#include "fedsac/opf/opf.hpp"
#include "fedsac/rdn/network.hpp"
#include "fedsac/sac/agent.hpp"

namespace fedsac::bench {

namespace fs = std::filesystem;

inline const std::vector<std::string>& training_header() {
  static const std::vector<std::string> h{"epoch", "episode", "client", "r_p", "r_a", "r_g", "r_sum"};
  return h;
}

inline const std::vector<std::string>& simulation_header() {
  static const std::vector<std::string> h{"day", "hour", "ev", "action", "soc", "price", "g_t", "p_sub"};
  return h;
}

inline const std::vector<std::string>& report_header() {
  static const std::vector<std::string> h{"run",   "days", "sigma_g", "r_p",
                                          "r_a",   "r_g",  "r_sum",   "sigma_g_decline"};
  return h;
}

/// Population standard deviation; exactly 0 for a constant series.
inline double sigma_g(std::span<const double> g) {
  if (g.empty()) throw RangeError("sigma_g: empty series");
  const auto [lo, hi] = std::minmax_element(g.begin(), g.end());
  if (*lo == *hi) return 0.0;
  double mean = 0.0;
  for (double x : g) mean += x;
  mean /= static_cast<double>(g.size());
  double sq = 0.0;
  for (double x : g) sq += (x - mean) * (x - mean);
  return std::sqrt(sq / static_cast<double>(g.size()));
}

/// 1 − σ / σ_baseline.
inline double decline_ratio(double sigma, double sigma_baseline) {
  if (!(sigma_baseline > 0.0)) throw DomainError("decline_ratio: baseline σ_g must be positive");
  return 1.0 - sigma / sigma_baseline;
}

/// Network, OPF engine, prices and fleet built from one config.
struct Scenario {
  std::shared_ptr<const rdn::RadialNetwork> net;
  std::shared_ptr<const opf::OpfEngine> engine;
  std::shared_ptr<const env::PriceBook> prices;
  std::unique_ptr<env::FleetEnv> env;
};

/// `weights` replaces the configured reward weights when given.
inline Scenario make_scenario(const ExperimentConfig& cfg,
                              const std::optional<env::RewardWeights>& weights = std::nullopt) {
  Scenario s;
  s.net = std::make_shared<const rdn::RadialNetwork>(rdn::load_case(cfg.paths.buses, cfg.paths.lines));
  s.engine = std::make_shared<const opf::OpfEngine>(s.net, cfg.opf, cfg.grid_signal);
  s.prices = std::make_shared<const env::PriceBook>(env::ingest_prices(cfg.paths.prices, cfg.train_split));
  env::EnvConfig ec = cfg.env;
  if (weights) ec.weights = *weights;
  s.env = std::make_unique<env::FleetEnv>(s.engine, s.prices, ec, derive_seed(cfg.seed, "env"));
  return s;
}

/// Deterministic actors, one shared by every EV or one per EV.
class Policy {
 public:
  Policy(std::vector<nn::DenseNet> actors, nn::ActionBounds bounds)
      : actors_(std::move(actors)), bounds_(bounds) {
    if (actors_.empty()) throw ShapeError("Policy: no actor");
  }

  static Policy shared(const sac::Snapshot& s, nn::ActionBounds b) { return Policy({s.actor}, b); }

  static Policy per_client(std::span<const sac::Snapshot> s, nn::ActionBounds b) {
    std::vector<nn::DenseNet> a;
    for (const auto& x : s) a.push_back(x.actor);
    return Policy(std::move(a), b);
  }

  /// A bundle file is a shared model; a directory holds client<i>.ckpt files.
  static Policy load(const fs::path& path, int n_evs, nn::ActionBounds b) {
    if (!fs::is_directory(path)) return shared(sac::Snapshot::from_bundle(nn::load_bundle(path)), b);
    std::vector<sac::Snapshot> snaps;
    for (int i = 0; i < n_evs; ++i) {
      snaps.push_back(sac::Snapshot::from_bundle(nn::load_bundle(path / client_file(i))));
    }
    return per_client(snaps, b);
  }

  static std::string client_file(int i) { return "client" + std::to_string(i) + ".ckpt"; }

  double act(int ev, const Eigen::VectorXd& obs) const {
    const auto& net = actors_.size() == 1 ? actors_.front() : actors_.at(static_cast<std::size_t>(ev));
    const Eigen::VectorXd out = net.forward(obs);
    Eigen::RowVectorXd mu(1), ls(1), eps = Eigen::RowVectorXd::Zero(1);
    mu[0] = out[0];
    ls[0] = out[1];
    return nn::sample_squashed(mu, ls, eps, bounds_).action[0];
  }

  std::size_t size() const noexcept { return actors_.size(); }

 private:
  std::vector<nn::DenseNet> actors_;
  nn::ActionBounds bounds_;
};

struct Departure {
  long day = 0;
  int ev = 0;
  double soc = 0.0;
  double soc_d = 0.0;
};

struct SimulationSummary {
  int days = 0;
  std::vector<double> g_t;                   ///< one entry per hour
  std::vector<fed::EpisodeMetrics> per_ev;   ///< cumulative λ-weighted rewards
  std::vector<Departure> departures;
  double min_soc = std::numeric_limits<double>::infinity();

  /// Component totals averaged over EVs.
  fed::EpisodeMetrics mean_rewards() const {
    fed::EpisodeMetrics m;
    for (const auto& e : per_ev) {
      m.r_p += e.r_p;
      m.r_a += e.r_a;
      m.r_g += e.r_g;
      m.r_sum += e.r_sum;
    }
    const double n = static_cast<double>(per_ev.size());
    m.r_p /= n;
    m.r_a /= n;
    m.r_g /= n;
    m.r_sum /= n;
    return m;
  }

  /// Share of departures with SoC ≥ SoC_d − margin.
  double satisfied_share(double margin) const {
    if (departures.empty()) return 1.0;
    long ok = 0;
    for (const auto& d : departures) ok += d.soc >= d.soc_d - margin ? 1 : 0;
    return static_cast<double>(ok) / static_cast<double>(departures.size());
  }
};

/// Deterministic rollout over `days` consecutive held-out days from the
/// first simulation day, carrying SoC from day to day. Day seeds depend only
/// on the root seed, so every policy sees the same days.
inline SimulationSummary simulate(env::FleetEnv& env, const Policy& policy, std::uint64_t seed, int days,
                                  csv::Writer* log = nullptr) {
  const auto [lo, hi] = env.simulation_days();
  if (days < 1 || lo + days - 1 > hi) {
    throw RangeError("simulation needs " + std::to_string(days) + " held-out days; the price file has " +
                     std::to_string(std::max<long>(hi - lo + 1, 0)));
  }
  const int n = env.n_evs();
  SimulationSummary sum;
  sum.days = days;
  sum.per_ev.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) sum.per_ev[i].client = i;
  for (int k = 0; k < days; ++k) {
    const long day = lo + k;
    env.reset_day(day, derive_seed(seed, "sim-day", {static_cast<std::uint64_t>(day)}), k > 0);
    auto on_step = [&](const env::JointStepResult& res) {
      sum.g_t.push_back(res.g_t);
      for (int i = 0; i < n; ++i) {
        const auto& st = res.evs[i];
        sum.min_soc = std::min(sum.min_soc, st.soc);
        if (st.done) {
          const auto& plan = env.plan(i);
          const auto& s = plan.office.t_d == res.hour + 1 ? plan.office : plan.home;
          sum.departures.push_back({day, i, st.soc, s.soc_d});
        }
        if (log) log->row(day, res.hour, i, st.action, st.soc, st.price, res.g_t, res.p_sub);
      }
    };
    auto act = [&](int i, const Eigen::VectorXd& o) { return policy.act(i, o); };
    const auto tot = fed::play_day(env, act, {}, on_step);
    for (int i = 0; i < n; ++i) {
      auto& m = sum.per_ev[i];
      m.r_p += tot.per_client[i].r_p;
      m.r_a += tot.per_client[i].r_a;
      m.r_g += tot.per_client[i].r_g;
      m.r_sum += tot.per_client[i].r_sum;
    }
  }
  return sum;
}

/// Files written by `train` under its output directory.
struct TrainLayout {
  fs::path dir;
  fs::path metrics() const { return dir / "training_metrics.csv"; }
  fs::path global() const { return dir / "global.ckpt"; }
  fs::path round(int k) const { return dir / "checkpoints" / ("round" + std::to_string(k) + ".ckpt"); }
  fs::path clients() const { return dir / "clients"; }
};

struct TrainResult {
  fed::GlobalModel global;
  std::vector<sac::Snapshot> clients;  ///< final local models
  long metric_rows = 0;
};

struct TrainOptions {
  std::optional<env::RewardWeights> weights;  ///< training reward override
  std::optional<fs::path> init;               ///< start every client from this model
  std::ostream* progress = nullptr;
};

/// Runs federated (or isolated) training and writes metrics and checkpoints.
inline TrainResult train(const ExperimentConfig& cfg, const fs::path& out, const TrainOptions& opt = {}) {
  const TrainLayout L{out};
  fs::create_directories(L.dir / "checkpoints");
  fs::create_directories(L.clients());
  Scenario sc = make_scenario(cfg, opt.weights);
  fed::Federation fed(*sc.env, cfg.sac, cfg.fed);
  if (opt.init) {
    fed::GlobalModel g{sac::Snapshot::from_bundle(nn::load_bundle(*opt.init)), 0, {}};
    fed::broadcast(g, fed.clients());
  }
  TrainResult result;
  {
    csv::Writer w(L.metrics(), training_header());
    auto sink = [&](const fed::EpisodeMetrics& m) {
      w.row(m.epoch, m.episode, m.client, m.r_p, m.r_a, m.r_g, m.r_sum);
      ++result.metric_rows;
    };
    auto on_round = [&](const fed::GlobalModel& g) {
      nn::save_bundle(L.round(g.round), g.params.to_bundle());
      if (opt.progress) {
        *opt.progress << "round " << g.round << "/" << cfg.fed.global_epochs << " done" << std::endl;
      }
    };
    result.global = fed.train(sink, on_round);
  }
  nn::save_bundle(L.global(), result.global.params.to_bundle());
  for (int i = 0; i < static_cast<int>(fed.clients().size()); ++i) {
    result.clients.push_back(fed.clients()[i].export_params());
    nn::save_bundle(L.clients() / Policy::client_file(i), result.clients.back().to_bundle());
  }
  return result;
}

/// Writes the hourly log of a `trip_days` rollout.
inline SimulationSummary simulate_trip(const ExperimentConfig& cfg, const Policy& policy, const fs::path& csv_file) {
  Scenario sc = make_scenario(cfg);
  csv::Writer w(csv_file, simulation_header());
  return simulate(*sc.env, policy, cfg.seed, cfg.eval.trip_days, &w);
}

struct ReportRow {
  std::string run;
  int days = 0;
  double sigma_g = 0.0;
  fed::EpisodeMetrics rewards;
  double decline = std::numeric_limits<double>::quiet_NaN();
};

/// σ_g and mean cumulative rewards over `days` held-out days, scored with
/// the configured reward weights.
inline ReportRow evaluate_policy(const ExperimentConfig& cfg, const Policy& policy, const std::string& run, int days) {
  Scenario sc = make_scenario(cfg);
  const auto sum = simulate(*sc.env, policy, cfg.seed, days);
  return {run, days, sigma_g(sum.g_t), sum.mean_rewards(), std::numeric_limits<double>::quiet_NaN()};
}

inline void write_report(const fs::path& file, const std::vector<ReportRow>& rows) {
  csv::Writer w(file, report_header());
  for (const auto& r : rows) {
    w.row(r.run, r.days, r.sigma_g, r.rewards.r_p, r.rewards.r_a, r.rewards.r_g, r.rewards.r_sum, r.decline);
  }
}

/// The configuration with λ_g = 0.
inline env::RewardWeights without_grid(const ExperimentConfig& cfg) {
  env::RewardWeights w = cfg.env.weights;
  w.lambda_g = 0.0;
  return w;
}

}  // namespace fedsac::bench
