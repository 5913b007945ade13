#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

#include "uavland/reward.hpp"
#include "uavland/types.hpp"

namespace uavland {

// Landing scenario geometry and kinematics. Heights are measured above the
// pad's upper surface.
struct ScenarioConfig {
  double dt = 0.1;
  int max_steps = 40;
  double pad_half_green = 2.0;
  double pad_half_red = 0.25;
  double start_height = 2.0;
  double start_box_half = 1.0;
  double alpha_descent = 0.8;
  double v_desc_min = 0.2;
  double v_desc_max = 1.5;
  double landed_threshold = 0.05;
  double abort_radius = 5.0;
  double vel_time_constant = 0.3;
  double a_max = 1.0;

  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw std::invalid_argument(std::string("ScenarioConfig: ") + what);
    };
    require(dt > 0.0, "dt must be positive");
    require(max_steps >= 1, "max_steps must be >= 1");
    require(pad_half_red > 0.0 && pad_half_red < pad_half_green,
            "need 0 < pad_half_red < pad_half_green");
    require(landed_threshold > 0.0 && landed_threshold < start_height,
            "need 0 < landed_threshold < start_height");
    require(start_box_half >= 0.0, "start_box_half must be non-negative");
    require(v_desc_min <= v_desc_max, "need v_desc_min <= v_desc_max");
    require(vel_time_constant > 0.0, "vel_time_constant must be positive");
    require(a_max > 0.0, "a_max must be positive");
    require(abort_radius > 0.0, "abort_radius must be positive");
  }
};

// Downward speed commanded by the altitude-proportional descent law.
inline double descent_rate(const ScenarioConfig& cfg, double p_z) {
  if (!(p_z >= 0.0)) throw std::domain_error("descent_rate: negative height");
  return std::clamp(cfg.alpha_descent * p_z, cfg.v_desc_min, cfg.v_desc_max);
}

inline ActionCmd clamp_action(const ScenarioConfig& cfg, ActionCmd a) {
  if (!std::isfinite(a.a_x) || !std::isfinite(a.a_y)) {
    throw std::invalid_argument("action must be finite");
  }
  a.a_x = std::clamp(a.a_x, -cfg.a_max, cfg.a_max);
  a.a_y = std::clamp(a.a_y, -cfg.a_max, cfg.a_max);
  return a;
}

inline Zone classify_zone(const ScenarioConfig& cfg, double p_x, double p_y) {
  const double r = std::max(std::abs(p_x), std::abs(p_y));
  if (r <= cfg.pad_half_red) return Zone::Red;
  if (r <= cfg.pad_half_green) return Zone::Green;
  return Zone::Off;
}

inline Observation observe(const VehicleState& s) {
  return {s.p_x, s.p_y, s.p_z, s.v_x, s.v_y, s.v_z};
}

inline VehicleState state_from_observation(const Observation& o) {
  return {o[0], o[1], o[2], o[3], o[4], o[5]};
}

// One kinematic step. `steps_after` is the step count including this step.
// The reward field is left at zero; LandingEnv fills it in.
inline StepOutcome simulate_step(const ScenarioConfig& cfg, const VehicleState& s,
                                 const ActionCmd& action, int steps_after) {
  const ActionCmd a = clamp_action(cfg, action);
  const double gain = cfg.dt / cfg.vel_time_constant;

  StepOutcome out;
  VehicleState& n = out.next_state;
  n.v_x = s.v_x + (a.a_x - s.v_x) * gain;
  n.v_y = s.v_y + (a.a_y - s.v_y) * gain;
  n.v_z = -descent_rate(cfg, s.p_z);
  n.p_x = s.p_x + n.v_x * cfg.dt;
  n.p_y = s.p_y + n.v_y * cfg.dt;
  n.p_z = s.p_z + n.v_z * cfg.dt;

  if (n.p_z <= cfg.landed_threshold) {
    out.termination = Termination::Landed;
    out.zone = classify_zone(cfg, n.p_x, n.p_y);
  } else if (std::max(std::abs(n.p_x), std::abs(n.p_y)) > cfg.abort_radius) {
    out.termination = Termination::OutOfRange;
  } else if (steps_after >= cfg.max_steps) {
    out.termination = Termination::TimeOut;
  }
  out.done = out.termination != Termination::Running;
  return out;
}

// Uniform action-agnostic environment handle: the in-process simulator and
// the remote bridge client both implement it.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual VehicleState reset(std::uint64_t seed) = 0;
  virtual StepOutcome step(const ActionCmd& action) = 0;
  virtual VehicleState state() const = 0;
  virtual const ScenarioConfig& scenario() const = 0;
};

class LandingEnv final : public Environment {
 public:
  explicit LandingEnv(ScenarioConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

  VehicleState reset(Rng& rng) {
    std::uniform_real_distribution<double> box(-cfg_.start_box_half, cfg_.start_box_half);
    state_ = {};
    if (cfg_.start_box_half > 0.0) {
      state_.p_x = box(rng);
      state_.p_y = box(rng);
    }
    state_.p_z = cfg_.start_height;
    steps_ = 0;
    active_ = true;
    prev_shaping_ = reward::shaping(reward::make_input(state_, {}, 0.0));
    return state_;
  }

  VehicleState reset(std::uint64_t seed) override {
    Rng rng(seed);
    return reset(rng);
  }

  StepOutcome step(const ActionCmd& action) override {
    if (!active_) throw std::logic_error("step called on an inactive episode");
    const ActionCmd a = clamp_action(cfg_, action);
    StepOutcome out = simulate_step(cfg_, state_, a, steps_ + 1);
    const double C =
        out.termination == Termination::Landed ? reward::landed_bonus_C(out.zone) : 0.0;
    const double shaping_now = reward::shaping(reward::make_input(out.next_state, a, C));
    out.reward = reward::step_reward(shaping_now, prev_shaping_);
    prev_shaping_ = shaping_now;
    state_ = out.next_state;
    ++steps_;
    active_ = !out.done;
    return out;
  }

  VehicleState state() const override { return state_; }
  const ScenarioConfig& scenario() const override { return cfg_; }
  int steps() const { return steps_; }
  bool active() const { return active_; }
  double last_shaping() const { return prev_shaping_; }

 private:
  ScenarioConfig cfg_;
  VehicleState state_{};
  int steps_ = 0;
  bool active_ = false;
  double prev_shaping_ = 0.0;
};

}  // namespace uavland
