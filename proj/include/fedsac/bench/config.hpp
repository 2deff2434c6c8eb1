#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fedsac/core/csv.hpp"
#include "fedsac/core/error.hpp"
#include "fedsac/env/fleet_env.hpp"
#include "fedsac/fed/federation.hpp"
#include "fedsac/opf/opf.hpp"
#include "fedsac/sac/agent.hpp"

namespace fedsac::bench {

struct PathConfig {
  std::filesystem::path buses = "buses.csv";
  std::filesystem::path lines = "lines.csv";
  std::filesystem::path prices = "prices.csv";
  std::filesystem::path output = "out";
};

struct EvalConfig {
  int sim_days = 100;
  int trip_days = 5;
  int compare_days = 20;  ///< held-out days of the federated-vs-isolated comparison
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  PathConfig paths;
  env::EnvConfig env;
  double train_split = 0.8;
  opf::GridSignal grid_signal = opf::GridSignal::substation;
  opf::IPMSettings opf;
  sac::SACHyper sac;
  fed::RoundConfig fed;
  EvalConfig eval;

  void validate() const {
    env.validate();
    opf.validate();
    sac.validate();
    fed.validate();
    if (!(train_split > 0.0 && train_split < 1.0)) throw RangeError("env.train_split must lie in (0, 1)");
    if (fed.n_clients != env.n_evs) throw RangeError("fed.n_clients must equal env.n_evs");
    if (eval.sim_days < 1 || eval.trip_days < 1 || eval.compare_days < 1) {
      throw RangeError("eval day counts must be >= 1");
    }
  }
};

namespace detail {

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

inline double to_double(const std::string& v, const std::string& ctx) { return csv::parse_double(v, ctx); }

inline int to_int(const std::string& v, const std::string& ctx) {
  const long long x = csv::parse_int(v, ctx);
  if (x < INT32_MIN || x > INT32_MAX) throw ParseError(ctx + ": integer out of range");
  return static_cast<int>(x);
}

inline bool to_bool(const std::string& v, const std::string& ctx) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ParseError(ctx + ": expected true or false, got '" + v + "'");
}

inline std::uint64_t to_u64(const std::string& v, const std::string& ctx) {
  std::size_t used = 0;
  unsigned long long x = 0;
  try {
    x = std::stoull(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty() || v[0] == '-') throw ParseError(ctx + ": expected unsigned integer, got '" + v + "'");
  return x;
}

inline std::vector<int> to_int_list(const std::string& v, const std::string& ctx) {
  std::vector<int> out;
  for (auto f : csv::split(v)) out.push_back(to_int(std::string(csv::trim(f)), ctx));
  return out;
}

template <class Get>
Setter real(Get get) {
  return [get](ExperimentConfig& c, const std::string& v, const std::string& ctx) { get(c) = to_double(v, ctx); };
}
template <class Get>
Setter integer(Get get) {
  return [get](ExperimentConfig& c, const std::string& v, const std::string& ctx) { get(c) = to_int(v, ctx); };
}
template <class Get>
Setter boolean(Get get) {
  return [get](ExperimentConfig& c, const std::string& v, const std::string& ctx) { get(c) = to_bool(v, ctx); };
}

inline void add_time_dist(std::map<std::string, Setter>& keys, const std::string& prefix,
                          std::function<ev::TimeDist&(ExperimentConfig&)> get) {
  keys[prefix + ".mean"] = real([get](ExperimentConfig& c) -> double& { return get(c).mean; });
  keys[prefix + ".std"] = real([get](ExperimentConfig& c) -> double& { return get(c).std; });
  keys[prefix + ".min"] = real([get](ExperimentConfig& c) -> double& { return get(c).min; });
  keys[prefix + ".max"] = real([get](ExperimentConfig& c) -> double& { return get(c).max; });
}

inline std::map<std::string, Setter> build_keys() {
  using C = ExperimentConfig;
  std::map<std::string, Setter> k;
  k["seed"] = [](C& c, const std::string& v, const std::string& ctx) { c.seed = to_u64(v, ctx); };
  k["paths.buses"] = [](C& c, const std::string& v, const std::string&) { c.paths.buses = v; };
  k["paths.lines"] = [](C& c, const std::string& v, const std::string&) { c.paths.lines = v; };
  k["paths.output"] = [](C& c, const std::string& v, const std::string&) { c.paths.output = v; };
  k["env.price_file"] = [](C& c, const std::string& v, const std::string&) { c.paths.prices = v; };

  k["env.n_evs"] = integer([](C& c) -> int& { return c.env.n_evs; });
  k["env.n_window"] = integer([](C& c) -> int& { return c.env.n_window; });
  k["env.driving_drain"] = real([](C& c) -> double& { return c.env.driving_drain; });
  k["env.infeasible_penalty"] = real([](C& c) -> double& { return c.env.infeasible_penalty; });
  k["env.init_soc_max"] = real([](C& c) -> double& { return c.env.init_soc_max; });
  k["env.train_split"] = real([](C& c) -> double& { return c.train_split; });
  k["env.price_time_offset"] = integer([](C& c) -> int& { return c.env.price_noise.max_time_offset; });
  k["env.price_additive"] = real([](C& c) -> double& { return c.env.price_noise.max_additive; });
  k["env.grid_signal"] = [](C& c, const std::string& v, const std::string& ctx) {
    if (v == "substation") {
      c.grid_signal = opf::GridSignal::substation;
    } else if (v == "loss_delta") {
      c.grid_signal = opf::GridSignal::loss_delta;
    } else {
      throw ParseError(ctx + ": env.grid_signal must be substation or loss_delta");
    }
  };
  k["env.reward.lambda_p"] = real([](C& c) -> double& { return c.env.weights.lambda_p; });
  k["env.reward.lambda_a"] = real([](C& c) -> double& { return c.env.weights.lambda_a; });
  k["env.reward.lambda_g"] = real([](C& c) -> double& { return c.env.weights.lambda_g; });
  k["env.reward.kappa_ta"] = real([](C& c) -> double& { return c.env.weights.kappa_ta; });
  k["env.reward.kappa_ra"] = real([](C& c) -> double& { return c.env.weights.kappa_ra; });

  k["ev.capacity"] = real([](C& c) -> double& { return c.env.ev_template.capacity; });
  k["ev.eta_c"] = real([](C& c) -> double& { return c.env.ev_template.eta_c; });
  k["ev.eta_d"] = real([](C& c) -> double& { return c.env.ev_template.eta_d; });
  k["ev.a_max_g2v"] = real([](C& c) -> double& { return c.env.ev_template.a_max_g2v; });
  k["ev.a_max_v2g"] = real([](C& c) -> double& { return c.env.ev_template.a_max_v2g; });

  k["habits.day_start_hour"] = integer([](C& c) -> int& { return c.env.habits.day_start_hour; });
  k["habits.beta2.mean"] = real([](C& c) -> double& { return c.env.habits.beta2_mean; });
  k["habits.beta2.std"] = real([](C& c) -> double& { return c.env.habits.beta2_std; });
  k["habits.beta2.min"] = real([](C& c) -> double& { return c.env.habits.beta2_min; });
  k["habits.beta2.max"] = real([](C& c) -> double& { return c.env.habits.beta2_max; });
  for (int kind = 1; kind <= 3; ++kind) {
    const std::size_t i = static_cast<std::size_t>(kind - 1);
    const std::string p = "habits.kind" + std::to_string(kind);
    add_time_dist(k, p + ".home_departure", [i](C& c) -> ev::TimeDist& { return c.env.habits.kinds[i].home_departure; });
    add_time_dist(k, p + ".office_departure", [i](C& c) -> ev::TimeDist& { return c.env.habits.kinds[i].office_departure; });
    k[p + ".commute_min"] = real([i](C& c) -> double& { return c.env.habits.kinds[i].commute_min; });
    k[p + ".commute_max"] = real([i](C& c) -> double& { return c.env.habits.kinds[i].commute_max; });
    k[p + ".delay_min"] = real([i](C& c) -> double& { return c.env.habits.kinds[i].delay_min; });
    k[p + ".delay_max"] = real([i](C& c) -> double& { return c.env.habits.kinds[i].delay_max; });
    k[p + ".beta1_min"] = real([i](C& c) -> double& { return c.env.habits.kinds[i].beta1_min; });
    k[p + ".beta1_max"] = real([i](C& c) -> double& { return c.env.habits.kinds[i].beta1_max; });
    k[p + ".weight"] = real([i](C& c) -> double& { return c.env.habits.kinds[i].weight; });
  }

  k["opf.tol"] = real([](C& c) -> double& { return c.opf.tol; });
  k["opf.max_iter"] = integer([](C& c) -> int& { return c.opf.max_iter; });
  k["opf.predictor_corrector"] = boolean([](C& c) -> bool& { return c.opf.predictor_corrector; });
  k["opf.approx_gi"] = boolean([](C& c) -> bool& { return c.env.approx_gi; });

  k["sac.gamma"] = real([](C& c) -> double& { return c.sac.gamma; });
  k["sac.tau"] = real([](C& c) -> double& { return c.sac.tau; });
  k["sac.lr_q"] = real([](C& c) -> double& { return c.sac.lr_q; });
  k["sac.lr_pi"] = real([](C& c) -> double& { return c.sac.lr_pi; });
  k["sac.lr_alpha"] = real([](C& c) -> double& { return c.sac.lr_alpha; });
  k["sac.batch"] = integer([](C& c) -> int& { return c.sac.batch; });
  k["sac.buffer_capacity"] = integer([](C& c) -> int& { return c.sac.buffer_capacity; });
  k["sac.target_entropy"] = real([](C& c) -> double& { return c.sac.target_entropy; });
  k["sac.updates_per_episode"] = integer([](C& c) -> int& { return c.sac.updates_per_episode; });
  k["sac.init_alpha"] = real([](C& c) -> double& { return c.sac.init_alpha; });
  k["sac.action_min"] = real([](C& c) -> double& { return c.sac.bounds.lo; });
  k["sac.action_max"] = real([](C& c) -> double& { return c.sac.bounds.hi; });
  k["sac.actor_hidden"] = [](C& c, const std::string& v, const std::string& ctx) { c.sac.actor_hidden = to_int_list(v, ctx); };
  k["sac.critic_hidden"] = [](C& c, const std::string& v, const std::string& ctx) { c.sac.critic_hidden = to_int_list(v, ctx); };

  k["fed.n_clients"] = integer([](C& c) -> int& { return c.fed.n_clients; });
  k["fed.episodes_per_round"] = integer([](C& c) -> int& { return c.fed.episodes_per_round; });
  k["fed.global_epochs"] = integer([](C& c) -> int& { return c.fed.global_epochs; });
  k["fed.federate"] = boolean([](C& c) -> bool& { return c.fed.federate; });
  k["fed.threads"] = integer([](C& c) -> int& { return c.fed.threads; });
  k["fed.aggregation"] = [](C& c, const std::string& v, const std::string&) { c.fed.aggregation = v; };
  k["fed.exchange_dir"] = [](C& c, const std::string& v, const std::string&) { c.fed.exchange_dir = v; };

  k["eval.sim_days"] = integer([](C& c) -> int& { return c.eval.sim_days; });
  k["eval.trip_days"] = integer([](C& c) -> int& { return c.eval.trip_days; });
  k["eval.compare_days"] = integer([](C& c) -> int& { return c.eval.compare_days; });
  return k;
}

}  // namespace detail

/// Every recognised key, sorted.
inline std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& [key, _] : detail::build_keys()) out.push_back(key);
  return out;
}

/// Parses `group.key = value` lines; `#` starts a comment. Unknown and
/// repeated keys are errors. Relative paths resolve against `base_dir`.
/// fed.n_clients defaults to env.n_evs when absent.
inline ExperimentConfig parse_config(std::istream& in, const std::string& name,
                                     const std::filesystem::path& base_dir) {
  static const auto keys = detail::build_keys();
  ExperimentConfig cfg;
  std::set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto body = csv::trim(line);
    if (body.empty()) continue;
    const std::string ctx = name + ":" + std::to_string(line_no);
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw ParseError(ctx + ": expected 'key = value'");
    const std::string key(csv::trim(body.substr(0, eq)));
    const std::string value(csv::trim(body.substr(eq + 1)));
    const auto it = keys.find(key);
    if (it == keys.end()) throw ParseError(ctx + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ParseError(ctx + ": repeated key '" + key + "'");
    if (value.empty()) throw ParseError(ctx + ": empty value for '" + key + "'");
    it->second(cfg, value, ctx);
  }
  if (!seen.count("fed.n_clients")) cfg.fed.n_clients = cfg.env.n_evs;
  cfg.fed.seed = cfg.seed;
  for (auto* p : {&cfg.paths.buses, &cfg.paths.lines, &cfg.paths.prices, &cfg.paths.output}) {
    if (p->is_relative()) *p = base_dir / *p;
  }
  if (cfg.fed.exchange_dir && cfg.fed.exchange_dir->is_relative()) {
    cfg.fed.exchange_dir = base_dir / *cfg.fed.exchange_dir;
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ParseError("cannot open " + file.string());
  return parse_config(in, file.string(), file.parent_path());
}

/// Replaces the root seed everywhere it is used.
inline void override_seed(ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.fed.seed = seed;
}

}  // namespace fedsac::bench
