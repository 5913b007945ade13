#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "uavland/mlp.hpp"
#include "uavland/replay.hpp"
#include "uavland/types.hpp"

namespace uavland::agents {

using nn::Matrix;
using nn::Mlp;
using nn::Vector;

enum class Algorithm { Ddpg, Td3, Sac };

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Ddpg: return "ddpg";
    case Algorithm::Td3: return "td3";
    case Algorithm::Sac: return "sac";
  }
  return "?";
}

inline Algorithm algorithm_from_string(const std::string& s) {
  if (s == "ddpg") return Algorithm::Ddpg;
  if (s == "td3") return Algorithm::Td3;
  if (s == "sac") return Algorithm::Sac;
  throw std::invalid_argument("unknown algorithm '" + s + "' (expected ddpg, td3 or sac)");
}

struct AgentConfig {
  double gamma = 0.99;
  double tau = 0.005;
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  double explore_sigma = 0.1;  // DDPG / TD3 behaviour noise
  double smooth_sigma = 0.2;   // TD3 target smoothing
  double smooth_clip = 0.5;
  int policy_delay = 2;
  double entropy_alpha = 0.2;
  // Linear anneal from entropy_alpha to entropy_alpha_final over this many
  // learn calls; 0 keeps alpha fixed.
  double entropy_alpha_final = 0.2;
  long entropy_anneal_steps = 0;
  std::size_t batch = 128;
  std::vector<std::size_t> hidden{64, 64};
  double actor_final_scale = 0.1;

  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw std::invalid_argument(std::string("AgentConfig: ") + what);
    };
    require(gamma > 0.0 && gamma <= 1.0, "gamma must be in (0, 1]");
    require(tau > 0.0 && tau <= 1.0, "tau must be in (0, 1]");
    require(actor_lr > 0.0 && critic_lr > 0.0, "learning rates must be positive");
    require(explore_sigma > 0.0 && smooth_sigma > 0.0, "noise scales must be positive");
    require(smooth_clip >= 0.0, "smooth_clip must be non-negative");
    require(policy_delay >= 1, "policy_delay must be >= 1");
    require(entropy_alpha >= 0.0 && entropy_alpha_final >= 0.0, "entropy alpha must be >= 0");
    require(entropy_anneal_steps >= 0, "entropy_anneal_steps must be >= 0");
    require(batch >= 1, "batch must be >= 1");
    require(!hidden.empty(), "at least one hidden layer required");
    for (auto h : hidden) require(h > 0, "hidden sizes must be positive");
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AgentConfig, gamma, tau, actor_lr, critic_lr,
                                                explore_sigma, smooth_sigma, smooth_clip,
                                                policy_delay, entropy_alpha, entropy_alpha_final,
                                                entropy_anneal_steps, batch, hidden,
                                                actor_final_scale)

struct LearnReport {
  double critic_loss = 0.0;
  double critic2_loss = 0.0;  // TD3 / SAC second critic
  double value_loss = 0.0;    // SAC state-value network
  double actor_loss = 0.0;
  bool actor_updated = false;
};

// Column-major view of a sampled minibatch.
struct Batch {
  Matrix states;       // 6 x B
  Matrix actions;      // 2 x B
  Vector rewards;      // B
  Matrix next_states;  // 6 x B
  Vector dones;        // B, 1.0 for terminal

  Eigen::Index size() const { return rewards.size(); }
};

inline Batch make_batch(std::span<const Transition> transitions) {
  const auto n = static_cast<Eigen::Index>(transitions.size());
  if (n == 0) throw std::invalid_argument("make_batch: empty batch");
  Batch b{Matrix(kStateDim, n), Matrix(kActionDim, n), Vector(n), Matrix(kStateDim, n),
          Vector(n)};
  for (Eigen::Index j = 0; j < n; ++j) {
    const Transition& t = transitions[static_cast<std::size_t>(j)];
    for (std::size_t i = 0; i < kStateDim; ++i) {
      b.states(static_cast<Eigen::Index>(i), j) = t.state[i];
      b.next_states(static_cast<Eigen::Index>(i), j) = t.next_state[i];
    }
    for (std::size_t i = 0; i < kActionDim; ++i) b.actions(static_cast<Eigen::Index>(i), j) = t.action[i];
    b.rewards(j) = t.reward;
    b.dones(j) = t.done ? 1.0 : 0.0;
  }
  return b;
}

inline Matrix stack(const Matrix& top, const Matrix& bottom) {
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

inline Vector to_vector(const Observation& obs) {
  Vector v(static_cast<Eigen::Index>(kStateDim));
  for (std::size_t i = 0; i < kStateDim; ++i) v(static_cast<Eigen::Index>(i)) = obs[i];
  return v;
}

// ---- scalar target rules ---------------------------------------------------

// r + gamma * (1 - done) * next_value
inline double bootstrap_target(double r, double gamma, double next_value, bool done) {
  return r + gamma * (done ? 0.0 : 1.0) * next_value;
}

inline double sac_q_target(double r, double gamma, double v_next, bool done) {
  return bootstrap_target(r, gamma, v_next, done);
}

inline double td3_target(double r, double gamma, double q1_next, double q2_next, bool done) {
  return bootstrap_target(r, gamma, std::min(q1_next, q2_next), done);
}

inline double sac_v_target(double q_min, double alpha, double log_prob) {
  return q_min - alpha * log_prob;
}

inline double clip_smoothing_noise(double draw, double clip) {
  return std::clamp(draw, -clip, clip);
}

// Shannon entropy in nats of a discrete distribution, 0 ln 0 := 0.
inline double entropy(std::span<const double> p) {
  if (p.empty()) throw std::invalid_argument("entropy: empty distribution");
  double sum = 0.0;
  for (double x : p) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw std::invalid_argument("entropy: negative or non-finite probability");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("entropy: probabilities do not sum to 1");
  double h = 0.0;
  for (double x : p) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return h;
}

// ---- tanh-squashed Gaussian policy ----------------------------------------

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kSquashEps = 1e-6;

struct SquashedSample {
  Matrix mean, log_std, std_dev, noise, pre_tanh, action;  // each 2 x B
  Vector log_prob;                                         // B
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> log_std_clamped;
};

// `head` is the raw actor output (4 x B: means then log-stds), `noise` the
// standard normal draws (2 x B; zeros give the deterministic mode).
inline SquashedSample squash_sample(const Matrix& head, const Matrix& noise) {
  const Eigen::Index d = head.rows() / 2;
  SquashedSample s;
  s.mean = head.topRows(d);
  const Matrix raw = head.bottomRows(d);
  s.log_std = raw.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
  s.log_std_clamped = (raw.array() < kLogStdMin) || (raw.array() > kLogStdMax);
  s.std_dev = s.log_std.array().exp().matrix();
  s.noise = noise;
  s.pre_tanh = s.mean + s.std_dev.cwiseProduct(noise);
  s.action = s.pre_tanh.array().tanh().matrix();
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  s.log_prob = Vector::Zero(head.cols());
  for (Eigen::Index j = 0; j < head.cols(); ++j) {
    double lp = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      const double e = noise(i, j);
      const double a = s.action(i, j);
      lp += -0.5 * e * e - s.log_std(i, j) - half_log_2pi;
      lp -= std::log(1.0 - a * a + kSquashEps);
    }
    s.log_prob(j) = lp;
  }
  return s;
}

// Gradient of mean_j [ alpha * log_prob_j - Q(s_j, a_j) ] with respect to
// the raw actor head, given dQ/da at the sampled actions.
inline Matrix squashed_policy_head_gradient(const SquashedSample& s, const Matrix& dq_da,
                                            double alpha) {
  const Eigen::Index d = s.mean.rows();
  const Eigen::Index n = s.mean.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  Matrix grad(2 * d, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) {
      const double a = s.action(i, j);
      const double one_minus = 1.0 - a * a;
      const double dlogp_du = 2.0 * a * one_minus / (one_minus + kSquashEps);
      const double dq_du = dq_da(i, j) * one_minus;
      const double du_dlogstd = s.std_dev(i, j) * s.noise(i, j);
      grad(i, j) = -(dq_du - alpha * dlogp_du) * inv_n;
      const double dlogp_dlogstd = -1.0 + dlogp_du * du_dlogstd;
      const double g = -(dq_du * du_dlogstd - alpha * dlogp_dlogstd) * inv_n;
      grad(d + i, j) = s.log_std_clamped(i, j) ? 0.0 : g;
    }
  }
  return grad;
}

// ---- shared critic helpers --------------------------------------------------

// One regression step of `net` toward `targets`; returns the pre-step MSE.
inline double regress(Mlp& net, const Matrix& input, const Vector& targets,
                      const nn::AdamConfig& adam) {
  const nn::Tape tape = net.record(input);
  const Vector diff = tape.output().row(0).transpose() - targets;
  const double n = static_cast<double>(targets.size());
  net.backward(tape, (2.0 / n) * diff.transpose());
  net.adam_step(adam);
  return diff.squaredNorm() / n;
}

inline double mse(const Mlp& net, const Matrix& input, const Vector& targets) {
  const Vector diff = net.forward(input).row(0).transpose() - targets;
  return diff.squaredNorm() / static_cast<double>(targets.size());
}

// Accumulates the deterministic policy gradient of -mean Q(s, mu(s)) into
// `actor`; the critic's parameters are untouched. Returns -mean Q.
inline double accumulate_deterministic_actor_gradient(Mlp& actor, const Mlp& critic,
                                                      const Matrix& states) {
  const nn::Tape actor_tape = actor.record(states);
  const nn::Tape critic_tape = critic.record(stack(states, actor_tape.output()));
  const double n = static_cast<double>(states.cols());
  const Matrix dq_dinput =
      critic.input_gradient(critic_tape, Matrix::Constant(1, states.cols(), 1.0 / n));
  const Matrix dq_da = dq_dinput.bottomRows(actor.output_size());
  actor.backward(actor_tape, -dq_da);
  return -critic_tape.output().mean();
}

inline bool all_finite(const Mlp& net) {
  for (const auto& l : net.layers()) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

inline std::vector<std::size_t> topology(std::size_t in, const std::vector<std::size_t>& hidden,
                                         std::size_t out) {
  std::vector<std::size_t> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

// ---- agent interface ---------------------------------------------------------

class Agent {
 public:
  virtual ~Agent() = default;
  virtual Algorithm algorithm() const = 0;
  virtual ActionCmd act(const Observation& obs, bool explore) = 0;
  virtual LearnReport learn(const Batch& batch) = 0;
  virtual std::vector<std::pair<std::string, Mlp*>> networks() = 0;

  LearnReport learn(std::span<const Transition> transitions) { return learn(make_batch(transitions)); }

  std::vector<std::pair<std::string, const Mlp*>> networks() const {
    std::vector<std::pair<std::string, const Mlp*>> out;
    for (auto& [name, net] : const_cast<Agent*>(this)->networks()) out.emplace_back(name, net);
    return out;
  }

  const AgentConfig& config() const { return cfg_; }

  bool parameters_finite() const {
    for (const auto& [name, net] : networks()) {
      if (!all_finite(*net)) return false;
    }
    return true;
  }

 protected:
  explicit Agent(AgentConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), rng_(seed) {
    cfg_.validate();
  }

  ActionCmd clamp_unit(double x, double y) const {
    return {std::clamp(x, -1.0, 1.0), std::clamp(y, -1.0, 1.0)};
  }

  nn::AdamConfig actor_adam() const { return {.lr = cfg_.actor_lr}; }
  nn::AdamConfig critic_adam() const { return {.lr = cfg_.critic_lr}; }

  AgentConfig cfg_;
  Rng rng_;
};

// ---- DDPG ---------------------------------------------------------------------

class DdpgAgent final : public Agent {
 public:
  DdpgAgent(AgentConfig cfg, std::uint64_t seed) : Agent(std::move(cfg), seed) {
    actor = Mlp::random(topology(kStateDim, cfg_.hidden, kActionDim), nn::Head::Tanh, rng_,
                        cfg_.actor_final_scale);
    critic = Mlp::random(topology(kStateDim + kActionDim, cfg_.hidden, 1), nn::Head::Linear, rng_);
    actor_target = actor;
    critic_target = critic;
  }

  Algorithm algorithm() const override { return Algorithm::Ddpg; }

  ActionCmd act(const Observation& obs, bool explore) override {
    const Vector a = actor.forward(to_vector(obs));
    double ax = a(0), ay = a(1);
    if (explore) {
      std::normal_distribution<double> noise(0.0, cfg_.explore_sigma);
      ax += noise(rng_);
      ay += noise(rng_);
    }
    return clamp_unit(ax, ay);
  }

  // y = r + gamma (1 - done) Q'(s', mu'(s'))
  Vector critic_targets(const Batch& b) const {
    const Matrix next_actions = actor_target.forward(b.next_states);
    const Matrix q_next = critic_target.forward(stack(b.next_states, next_actions));
    Vector y(b.size());
    for (Eigen::Index j = 0; j < b.size(); ++j) {
      y(j) = bootstrap_target(b.rewards(j), cfg_.gamma, q_next(0, j), b.dones(j) > 0.5);
    }
    return y;
  }

  using Agent::learn;
  LearnReport learn(const Batch& b) override {
    LearnReport report;
    const Vector y = critic_targets(b);
    report.critic_loss = regress(critic, stack(b.states, b.actions), y, critic_adam());
    report.actor_loss = accumulate_deterministic_actor_gradient(actor, critic, b.states);
    actor.adam_step(actor_adam());
    report.actor_updated = true;
    nn::soft_update(critic_target, critic, cfg_.tau);
    nn::soft_update(actor_target, actor, cfg_.tau);
    return report;
  }

  std::vector<std::pair<std::string, Mlp*>> networks() override {
    return {{"actor", &actor}, {"actor_target", &actor_target},
            {"critic", &critic}, {"critic_target", &critic_target}};
  }
  using Agent::networks;

  Mlp actor, actor_target, critic, critic_target;
};

// ---- TD3 ----------------------------------------------------------------------

class Td3Agent final : public Agent {
 public:
  Td3Agent(AgentConfig cfg, std::uint64_t seed) : Agent(std::move(cfg), seed) {
    actor = Mlp::random(topology(kStateDim, cfg_.hidden, kActionDim), nn::Head::Tanh, rng_,
                        cfg_.actor_final_scale);
    const auto critic_sizes = topology(kStateDim + kActionDim, cfg_.hidden, 1);
    critic1 = Mlp::random(critic_sizes, nn::Head::Linear, rng_);
    critic2 = Mlp::random(critic_sizes, nn::Head::Linear, rng_);
    actor_target = actor;
    critic1_target = critic1;
    critic2_target = critic2;
  }

  Algorithm algorithm() const override { return Algorithm::Td3; }

  ActionCmd act(const Observation& obs, bool explore) override {
    const Vector a = actor.forward(to_vector(obs));
    double ax = a(0), ay = a(1);
    if (explore) {
      std::normal_distribution<double> noise(0.0, cfg_.explore_sigma);
      ax += noise(rng_);
      ay += noise(rng_);
    }
    return clamp_unit(ax, ay);
  }

  // Unclipped N(0, smooth_sigma) draws, one per action component.
  Matrix draw_smoothing_noise(Eigen::Index n) {
    std::normal_distribution<double> noise(0.0, cfg_.smooth_sigma);
    Matrix out(static_cast<Eigen::Index>(kActionDim), n);
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, j) = noise(rng_);
    }
    return out;
  }

  // Shared twin-min target with clipped target-policy smoothing.
  Vector critic_targets(const Batch& b, const Matrix& smoothing_draws) const {
    Matrix next_actions = actor_target.forward(b.next_states);
    for (Eigen::Index j = 0; j < next_actions.cols(); ++j) {
      for (Eigen::Index i = 0; i < next_actions.rows(); ++i) {
        next_actions(i, j) = std::clamp(
            next_actions(i, j) + clip_smoothing_noise(smoothing_draws(i, j), cfg_.smooth_clip),
            -1.0, 1.0);
      }
    }
    const Matrix input = stack(b.next_states, next_actions);
    const Matrix q1 = critic1_target.forward(input);
    const Matrix q2 = critic2_target.forward(input);
    Vector y(b.size());
    for (Eigen::Index j = 0; j < b.size(); ++j) {
      y(j) = td3_target(b.rewards(j), cfg_.gamma, q1(0, j), q2(0, j), b.dones(j) > 0.5);
    }
    return y;
  }

  using Agent::learn;
  LearnReport learn(const Batch& b) override {
    const Matrix draws = draw_smoothing_noise(b.size());
    return learn(b, draws);
  }

  LearnReport learn(const Batch& b, const Matrix& smoothing_draws) {
    LearnReport report;
    const Vector y = critic_targets(b, smoothing_draws);
    const Matrix sa = stack(b.states, b.actions);
    report.critic_loss = regress(critic1, sa, y, critic_adam());
    report.critic2_loss = regress(critic2, sa, y, critic_adam());
    ++updates_;
    if (updates_ % cfg_.policy_delay == 0) {
      report.actor_loss = accumulate_deterministic_actor_gradient(actor, critic1, b.states);
      actor.adam_step(actor_adam());
      report.actor_updated = true;
      nn::soft_update(actor_target, actor, cfg_.tau);
      nn::soft_update(critic1_target, critic1, cfg_.tau);
      nn::soft_update(critic2_target, critic2, cfg_.tau);
    }
    return report;
  }

  long updates() const { return updates_; }

  std::vector<std::pair<std::string, Mlp*>> networks() override {
    return {{"actor", &actor},       {"actor_target", &actor_target},
            {"critic1", &critic1},   {"critic1_target", &critic1_target},
            {"critic2", &critic2},   {"critic2_target", &critic2_target}};
  }
  using Agent::networks;

  Mlp actor, actor_target, critic1, critic1_target, critic2, critic2_target;

 private:
  long updates_ = 0;
};

// ---- SAC ----------------------------------------------------------------------

// Five-network layout: stochastic actor, twin Q critics, state-value network
// and its soft-updated target.
class SacAgent final : public Agent {
 public:
  SacAgent(AgentConfig cfg, std::uint64_t seed) : Agent(std::move(cfg), seed) {
    actor = Mlp::random(topology(kStateDim, cfg_.hidden, 2 * kActionDim), nn::Head::Linear, rng_,
                        cfg_.actor_final_scale);
    const auto q_sizes = topology(kStateDim + kActionDim, cfg_.hidden, 1);
    critic1 = Mlp::random(q_sizes, nn::Head::Linear, rng_);
    critic2 = Mlp::random(q_sizes, nn::Head::Linear, rng_);
    value = Mlp::random(topology(kStateDim, cfg_.hidden, 1), nn::Head::Linear, rng_);
    value_target = value;
  }

  Algorithm algorithm() const override { return Algorithm::Sac; }

  struct ActResult {
    ActionCmd action;
    double log_prob = 0.0;
  };

  ActResult sample_action(const Observation& obs, bool explore) {
    Matrix noise = Matrix::Zero(static_cast<Eigen::Index>(kActionDim), 1);
    if (explore) {
      std::normal_distribution<double> normal(0.0, 1.0);
      for (Eigen::Index i = 0; i < noise.rows(); ++i) noise(i, 0) = normal(rng_);
    }
    const Matrix head = actor.forward(Matrix(to_vector(obs)));
    const SquashedSample s = squash_sample(head, noise);
    return {clamp_unit(s.action(0, 0), s.action(1, 0)), s.log_prob(0)};
  }

  ActionCmd act(const Observation& obs, bool explore) override {
    return sample_action(obs, explore).action;
  }

  double alpha() const {
    if (cfg_.entropy_anneal_steps <= 0) return cfg_.entropy_alpha;
    const double frac = std::min(1.0, static_cast<double>(learn_calls_) /
                                          static_cast<double>(cfg_.entropy_anneal_steps));
    return cfg_.entropy_alpha + (cfg_.entropy_alpha_final - cfg_.entropy_alpha) * frac;
  }

  Matrix draw_policy_noise(Eigen::Index n) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix out(static_cast<Eigen::Index>(kActionDim), n);
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, j) = normal(rng_);
    }
    return out;
  }

  // Q regression targets r + gamma (1 - done) V'(s').
  Vector q_targets(const Batch& b) const {
    const Matrix v_next = value_target.forward(b.next_states);
    Vector y(b.size());
    for (Eigen::Index j = 0; j < b.size(); ++j) {
      y(j) = sac_q_target(b.rewards(j), cfg_.gamma, v_next(0, j), b.dones(j) > 0.5);
    }
    return y;
  }

  using Agent::learn;
  LearnReport learn(const Batch& b) override {
    const Matrix noise = draw_policy_noise(b.size());
    return learn(b, noise);
  }

  // `policy_noise` (2 x B standard normal) drives the fresh reparameterized
  // action used by both the value target and the actor objective. All
  // targets and gradients come from the pre-update networks.
  LearnReport learn(const Batch& b, const Matrix& policy_noise) {
    LearnReport report;
    const double a = alpha();
    const double n = static_cast<double>(b.size());

    const Vector yq = q_targets(b);
    const Matrix sa = stack(b.states, b.actions);
    const nn::Tape q1_tape = critic1.record(sa);
    const nn::Tape q2_tape = critic2.record(sa);

    const nn::Tape actor_tape = actor.record(b.states);
    const SquashedSample pi = squash_sample(actor_tape.output(), policy_noise);
    const Matrix s_pi = stack(b.states, pi.action);
    const nn::Tape q1_pi_tape = critic1.record(s_pi);
    const Matrix q2_pi = critic2.forward(s_pi);

    Vector yv(b.size());
    for (Eigen::Index j = 0; j < b.size(); ++j) {
      yv(j) = sac_v_target(std::min(q1_pi_tape.output()(0, j), q2_pi(0, j)), a, pi.log_prob(j));
    }
    const nn::Tape v_tape = value.record(b.states);

    const Matrix dq_dinput = critic1.input_gradient(q1_pi_tape, Matrix::Ones(1, b.size()));
    const Matrix head_grad =
        squashed_policy_head_gradient(pi, dq_dinput.bottomRows(kActionDim), a);
    report.actor_loss = (a * pi.log_prob - q1_pi_tape.output().row(0).transpose()).mean();

    auto regress_taped = [n](Mlp& net, const nn::Tape& tape, const Vector& targets,
                             const nn::AdamConfig& adam) {
      const Vector diff = tape.output().row(0).transpose() - targets;
      net.backward(tape, (2.0 / n) * diff.transpose());
      net.adam_step(adam);
      return diff.squaredNorm() / n;
    };
    report.critic_loss = regress_taped(critic1, q1_tape, yq, critic_adam());
    report.critic2_loss = regress_taped(critic2, q2_tape, yq, critic_adam());
    report.value_loss = regress_taped(value, v_tape, yv, critic_adam());
    actor.backward(actor_tape, head_grad);
    actor.adam_step(actor_adam());
    report.actor_updated = true;
    nn::soft_update(value_target, value, cfg_.tau);
    ++learn_calls_;
    return report;
  }

  std::vector<std::pair<std::string, Mlp*>> networks() override {
    return {{"actor", &actor},     {"critic1", &critic1},           {"critic2", &critic2},
            {"value", &value},     {"value_target", &value_target}};
  }
  using Agent::networks;

  Mlp actor, critic1, critic2, value, value_target;

 private:
  long learn_calls_ = 0;
};

inline std::unique_ptr<Agent> make_agent(Algorithm algo, const AgentConfig& cfg, std::uint64_t seed) {
  switch (algo) {
    case Algorithm::Ddpg: return std::make_unique<DdpgAgent>(cfg, seed);
    case Algorithm::Td3: return std::make_unique<Td3Agent>(cfg, seed);
    case Algorithm::Sac: return std::make_unique<SacAgent>(cfg, seed);
  }
  throw std::invalid_argument("make_agent: unknown algorithm");
}

// ---- checkpoints ----------------------------------------------------------------

// {"format": "uavland-checkpoint", "version": 1, "algorithm": ..., "config": {...},
//  "networks": {name: <mlp text>}}
inline nlohmann::json checkpoint_json(const Agent& agent) {
  nlohmann::json j;
  j["format"] = "uavland-checkpoint";
  j["version"] = 1;
  j["algorithm"] = to_string(agent.algorithm());
  j["config"] = agent.config();
  nlohmann::json nets = nlohmann::json::object();
  for (const auto& [name, net] : agent.networks()) nets[name] = nn::to_text(*net);
  j["networks"] = std::move(nets);
  return j;
}

inline std::unique_ptr<Agent> agent_from_checkpoint(const nlohmann::json& j) {
  if (j.value("format", "") != "uavland-checkpoint" || j.value("version", 0) != 1) {
    throw std::runtime_error("not a uavland checkpoint (bad format/version)");
  }
  const Algorithm algo = algorithm_from_string(j.at("algorithm").get<std::string>());
  const AgentConfig cfg = j.at("config").get<AgentConfig>();
  auto agent = make_agent(algo, cfg, 0);
  const auto& nets = j.at("networks");
  for (auto& [name, net] : agent->networks()) {
    if (!nets.contains(name)) throw std::runtime_error("checkpoint missing network '" + name + "'");
    Mlp loaded = nn::from_text(nets.at(name).get<std::string>());
    if (!loaded.same_topology(*net)) {
      throw std::runtime_error("checkpoint network '" + name + "' does not match the manifest config");
    }
    net->copy_parameters_from(loaded);
  }
  return agent;
}

}  // namespace uavland::agents
