#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fedsac/bench/generators.hpp"
#include "fedsac/core/error.hpp"
#include "fedsac/core/random.hpp"
#include "fedsac/env/prices.hpp"
#include "fedsac/env/rewards.hpp"
#include "fedsac/ev/battery.hpp"
#include "fedsac/ev/habits.hpp"
#include "fedsac/opf/opf.hpp"
#include "fedsac/rdn/network.hpp"

namespace fedsac::env {

/// What an agent sees at one slot.
struct AgentObservation {
  std::vector<double> price_window;  ///< normalized ξ_{t−n+1} … ξ_t
  double t_d = 0.0;                  ///< hours to departure / 24
  double t_x = 0.0;                  ///< hours to anxiety onset / 24, 0 once passed
  double soc = 0.0;
  double soc_x = 0.0;                ///< expected SoC, 0 before onset
  double soc_d = 0.0;

  static constexpr int scalar_features = 5;

  Eigen::VectorXd vector() const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(price_window.size()) + scalar_features);
    for (std::size_t i = 0; i < price_window.size(); ++i) {
      v[static_cast<Eigen::Index>(i)] = price_window[i];
    }
    const auto n = static_cast<Eigen::Index>(price_window.size());
    v[n] = t_d;
    v[n + 1] = t_x;
    v[n + 2] = soc;
    v[n + 3] = soc_x;
    v[n + 4] = soc_d;
    return v;
  }

  bool valid() const {
    for (double p : price_window) {
      if (!std::isfinite(p)) return false;
    }
    auto unit = [](double x) { return x >= 0.0 && x <= 1.0; };
    return std::isfinite(t_d) && std::isfinite(t_x) && unit(soc) && unit(soc_x) && unit(soc_d);
  }
};

struct EnvConfig {
  RewardWeights weights;
  int n_window = 48;
  double driving_drain = 0.05;
  double infeasible_penalty = 10.0;  ///< grid reward magnitude for charging into an infeasible slot
  bool approx_gi = false;            ///< g_i = own power instead of a per-EV OPF solve
  PriceNoise price_noise;
  ev::HabitModel habits = ev::HabitModel::standard();
  ev::EVParams ev_template;
  int n_evs = 30;
  double init_soc_max = 0.95;

  void validate() const {
    weights.validate();
    habits.validate();
    ev_template.validate();
    if (n_window < 1) throw RangeError("env.n_window must be positive");
    if (!(driving_drain >= 0.0 && driving_drain <= 1.0)) {
      throw RangeError("env.driving_drain must lie in [0, 1]");
    }
    if (!(infeasible_penalty >= 0.0)) throw RangeError("env.infeasible_penalty must be >= 0");
    if (n_evs < 1) throw RangeError("need at least one EV");
    if (!(init_soc_max >= 0.0 && init_soc_max <= 1.0)) {
      throw RangeError("init_soc_max must lie in [0, 1]");
    }
  }
};

/// Per-EV outcome of one slot.
struct EVStep {
  bool active = false;  ///< plugged in during the slot
  bool done = false;    ///< the slot was the session's last
  double action = 0.0;  ///< rate after feasibility clipping
  double price = 0.0;   ///< raw station price ξ
  double power = 0.0;
  double g_i = 0.0;
  double r_p = 0.0, r_ta = 0.0, r_ra = 0.0, r_a = 0.0, r_g = 0.0, r = 0.0;
  double soc = 0.0;     ///< SoC after the slot
  AgentObservation next;
};

struct JointStepResult {
  int hour = 0;  ///< frame hour of the slot just played
  std::vector<EVStep> evs;
  double g_t = 0.0;
  double p_sub = 0.0;
  opf::SolveStatus opf_status = opf::SolveStatus::optimal;
};

/// All EVs of the fleet on one network, advanced together one hourly slot at
/// a time. A day runs over frame hours [0, 24).
class FleetEnv {
 public:
  static constexpr int hours_per_day = 24;

  FleetEnv(std::shared_ptr<const opf::OpfEngine> engine, std::shared_ptr<const PriceBook> prices,
           EnvConfig config, std::uint64_t seed)
      : engine_(std::move(engine)), prices_(std::move(prices)), cfg_(std::move(config)), seed_(seed) {
    cfg_.validate();
    const auto& net = engine_->network();
    Rng rng = make_rng(seed_, "fleet");
    for (int i = 0; i < cfg_.n_evs; ++i) {
      ev::EVParams p = cfg_.ev_template;
      p.bus = bench::ev_bus(net, i);
      p.kind = ev::sample_kind(cfg_.habits, rng);
      p.beta2 = ev::sample_beta2(cfg_.habits, rng);
      p.validate();
      fleet_.push_back(p);
    }
    soc_.assign(fleet_.size(), 0.0);
    plans_.resize(fleet_.size());
    prices_raw_.resize(fleet_.size());
    if (first_day(0) > last_day(prices_->train_hours())) {
      throw RangeError("price series too short for one training day");
    }
  }

  int n_evs() const noexcept { return static_cast<int>(fleet_.size()); }
  int obs_dim() const noexcept { return cfg_.n_window + AgentObservation::scalar_features; }
  const EnvConfig& config() const noexcept { return cfg_; }
  const ev::EVParams& params(int ev) const { return fleet_.at(ev); }
  const ev::DayPlan& plan(int ev) const { return plans_.at(ev); }
  double soc(int ev) const { return soc_.at(ev); }
  int hour() const noexcept { return t_; }
  long day() const noexcept { return day_; }
  bool day_over() const noexcept { return t_ >= hours_per_day; }
  const opf::OpfEngine& engine() const noexcept { return *engine_; }
  const PriceBook& prices() const noexcept { return *prices_; }

  /// Days whose whole price footprint lies in the training split.
  std::pair<long, long> training_days() const {
    return {first_day(0), last_day(prices_->train_hours())};
  }
  /// Days starting at or after the end of the training split.
  std::pair<long, long> simulation_days() const {
    return {first_day(static_cast<long>(prices_->train_hours())),
            last_day(prices_->hours())};
  }

  /// Starts day `day`. Session times, price perturbations and (unless
  /// `carry_soc`) the initial SoC are drawn from `seed`.
  void reset_day(long day, std::uint64_t seed, bool carry_soc) {
    const long start = absolute_hour(day, 0);
    const int back = cfg_.n_window - 1;
    const int span = back + hours_per_day + 1;
    const int shift = cfg_.price_noise.max_time_offset;
    if (start - back - shift < 0 || start + hours_per_day + shift >= static_cast<long>(prices_->hours())) {
      throw RangeError("day " + std::to_string(day) + " lacks price history or future");
    }
    day_ = day;
    t_ = 0;
    for (int i = 0; i < n_evs(); ++i) {
      auto& p = fleet_[i];
      plans_[i] = ev::sample_day(cfg_.habits, p.kind, derive_seed(seed, "habits", {static_cast<std::uint64_t>(i)}));
      p.beta1 = plans_[i].office.soc_d;
      if (!carry_soc) {
        Rng r = make_rng(seed, "init-soc", {static_cast<std::uint64_t>(i)});
        soc_[i] = uniform(r, 0.0, cfg_.init_soc_max);
      }
      Rng r = make_rng(seed, "price-offsets", {static_cast<std::uint64_t>(i)});
      auto offsets = sample_offsets(r, cfg_.price_noise, start - back, span);
      auto& raw = prices_raw_[i];
      raw.resize(static_cast<std::size_t>(span));
      for (int k = 0; k < span; ++k) {
        raw[k] = station_price(*prices_, offsets, start - back + k);
      }
    }
    note_arrivals();
  }

  /// Picks a random training day and starts it with fresh SoC.
  long reset_training_day(std::uint64_t seed) {
    auto [lo, hi] = training_days();
    Rng r = make_rng(seed, "training-day");
    const long d = lo + static_cast<long>(uniform_int(r, 0, static_cast<int>(hi - lo)));
    reset_day(d, seed, false);
    return d;
  }

  bool plugged(int ev) const { return !day_over() && plans_.at(ev).session_at(t_) != nullptr; }

  /// Raw price faced by `ev` at frame hour t of the current day.
  double price(int ev, int t) const {
    return prices_raw_.at(ev).at(static_cast<std::size_t>(t + cfg_.n_window - 1));
  }

  /// Observation of `ev` at frame hour t (the EV's session containing t, or
  /// ending at t, defines the time features).
  AgentObservation observe(int ev, int t) const {
    AgentObservation o;
    o.price_window.resize(static_cast<std::size_t>(cfg_.n_window));
    for (int k = 0; k < cfg_.n_window; ++k) {
      o.price_window[k] = prices_->normalize(prices_raw_[ev][static_cast<std::size_t>(t + k)]);
    }
    o.soc = soc_[ev];
    const auto& plan = plans_[ev];
    const ev::EVSession* s = plan.session_at(t);
    if (!s && t > 0) s = plan.session_at(t - 1);  // terminal observation at departure
    if (s) {
      const auto& p = fleet_[ev];
      o.t_d = std::max(s->t_d - t, 0) / 24.0;
      o.t_x = std::max(s->t_x - t, 0) / 24.0;
      o.soc_d = s->soc_d;
      o.soc_x = t >= s->t_x ? std::clamp(ev::anxiety_soc(std::min(t, s->t_d), *s, p), 0.0, 1.0) : 0.0;
    }
    return o;
  }

  AgentObservation observe(int ev) const { return observe(ev, t_); }

  /// Plays one slot with one rate per EV (ignored for unplugged EVs).
  JointStepResult joint_step(std::span<const double> actions) {
    if (day_over()) throw RangeError("joint_step: day is over; call reset_day");
    if (actions.size() != fleet_.size()) {
      throw ShapeError("joint_step: need one action per EV");
    }
    const int t = t_;
    const auto& net = engine_->network();
    JointStepResult res;
    res.hour = t;
    res.evs.resize(fleet_.size());
    std::vector<double> agg(net.num_buses(), 0.0);

    for (int i = 0; i < n_evs(); ++i) {
      auto& st = res.evs[i];
      st.active = plugged(i);
      st.price = price(i, t);
      if (!st.active) continue;
      if (!std::isfinite(actions[i])) throw DomainError("joint_step: non-finite action");
      const auto& p = fleet_[i];
      const double lo = std::max(-p.a_max_v2g, -soc_[i]);
      const double hi = std::min(p.a_max_g2v, 1.0 - soc_[i]);
      st.action = std::clamp(actions[i], lo, hi);
      st.power = ev::rate_to_power(st.action, p);
      agg[p.bus] += st.power;
    }

    const opf::OPFSolution full = engine_->solve(agg);
    res.opf_status = full.status;
    const bool feasible = full.status == opf::SolveStatus::optimal;
    if (feasible) {
      res.g_t = engine_->signal_of(full);
      res.p_sub = full.p_sub;
    } else {
      for (const auto& st : res.evs) res.g_t += st.power;
      res.p_sub = engine_->zero_load().p_sub + res.g_t;
    }

    for (int i = 0; i < n_evs(); ++i) {
      auto& st = res.evs[i];
      if (!st.active) continue;
      const auto& p = fleet_[i];
      const ev::EVSession& s = *plans_[i].session_at(t);
      if (st.action == 0.0) {
        st.g_i = 0.0;
      } else if (cfg_.approx_gi || !feasible) {
        st.g_i = st.power;
      } else {
        std::vector<double> own(net.num_buses(), 0.0);
        own[p.bus] = st.power;
        const auto sol = engine_->solve(own);
        st.g_i = sol.status == opf::SolveStatus::optimal ? engine_->signal_of(sol) : st.power;
      }
      st.r_p = power_reward(st.price, st.action);
      st.r_ta = time_anxiety_reward(t, soc_[i], s, p);
      const double soc_next = std::clamp(soc_[i] + st.action, 0.0, 1.0);
      st.done = t + 1 == s.t_d;
      st.r_ra = st.done ? range_anxiety_reward(soc_next, s.soc_d) : 0.0;
      st.r_a = anxiety_reward(st.r_ta, st.r_ra, cfg_.weights);
      if (feasible) {
        st.r_g = grid_reward(st.action, res.g_t, st.g_i);
      } else {
        st.r_g = st.action > 0.0 ? -cfg_.infeasible_penalty : 0.0;
      }
      st.r = sum_reward(st.r_p, st.r_a, st.r_g, cfg_.weights);
    }

    for (int i = 0; i < n_evs(); ++i) {
      soc_[i] = ev::soc_step(soc_[i], res.evs[i].action, t, plans_[i], cfg_.driving_drain);
      res.evs[i].soc = soc_[i];
    }
    t_ = t + 1;
    for (int i = 0; i < n_evs(); ++i) {
      if (res.evs[i].active) res.evs[i].next = observe(i, t_);
    }
    note_arrivals();
    return res;
  }

  long absolute_hour(long day, int frame_hour) const {
    return 24 * day + cfg_.habits.day_start_hour + frame_hour;
  }

 private:
  /// First day starting at or after `min_start` with its price window in range.
  long first_day(long min_start) const {
    const long need = cfg_.n_window - 1 + cfg_.price_noise.max_time_offset;
    long d = 0;
    while (absolute_hour(d, 0) - need < 0 || absolute_hour(d, 0) < min_start) ++d;
    return d;
  }

  long last_day(std::size_t end_hour) const {
    const long need = hours_per_day + cfg_.price_noise.max_time_offset;
    long d = static_cast<long>(end_hour) / 24;
    while (d >= 0 && absolute_hour(d, 0) + need >= static_cast<long>(end_hour)) --d;
    return d;
  }

  void note_arrivals() {
    if (day_over()) return;
    for (int i = 0; i < n_evs(); ++i) {
      auto& plan = plans_[i];
      if (plan.office.t_a == t_) plan.office.soc_init = soc_[i];
      if (plan.home.t_a == t_) plan.home.soc_init = soc_[i];
    }
  }

  std::shared_ptr<const opf::OpfEngine> engine_;
  std::shared_ptr<const PriceBook> prices_;
  EnvConfig cfg_;
  std::uint64_t seed_;
  std::vector<ev::EVParams> fleet_;
  std::vector<double> soc_;
  std::vector<ev::DayPlan> plans_;
  std::vector<std::vector<double>> prices_raw_;
  long day_ = 0;
  int t_ = 0;
};

}  // namespace fedsac::env
