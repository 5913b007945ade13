#pragma once

#include <charconv>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "uavland/agents.hpp"
#include "uavland/env.hpp"
#include "uavland/mlp.hpp"
#include "uavland/replay.hpp"

namespace uavland {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ScenarioConfig, dt, max_steps, pad_half_green,
                                                pad_half_red, start_height, start_box_half,
                                                alpha_descent, v_desc_min, v_desc_max,
                                                landed_threshold, abort_radius,
                                                vel_time_constant, a_max)

namespace harness {

using agents::AgentConfig;
using agents::Algorithm;

inline constexpr std::size_t kAverageWindow = 50;

struct ReplaySettings {
  std::size_t capacity = 100000;
  std::size_t warmup = 1000;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ReplaySettings, capacity, warmup)

struct RunConfig {
  Algorithm algorithm = Algorithm::Sac;
  int episodes = 500;
  std::uint64_t seed = 0;
  ScenarioConfig scenario;
  AgentConfig agent;
  ReplaySettings replay;
  std::string env = "builtin";  // "builtin" or "remote"
  std::string remote_address = "127.0.0.1:7460";
  std::string output_dir = "runs/latest";
  int checkpoint_every = 100;
  // Off by default so that metrics files are a pure function of config and
  // seed; the wall_ms column then holds 0.
  bool record_wall_clock = false;

  void validate() const {
    if (episodes < 1) throw std::invalid_argument("RunConfig: episodes must be >= 1");
    if (env != "builtin" && env != "remote") {
      throw std::invalid_argument("RunConfig: env must be 'builtin' or 'remote'");
    }
    if (checkpoint_every < 1) throw std::invalid_argument("RunConfig: checkpoint_every must be >= 1");
    if (replay.capacity < agent.batch) {
      throw std::invalid_argument("RunConfig: replay capacity smaller than batch");
    }
    scenario.validate();
    agent.validate();
  }
};

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json{{"algorithm", agents::to_string(c.algorithm)},
                     {"episodes", c.episodes},
                     {"seed", c.seed},
                     {"scenario", c.scenario},
                     {"agent", c.agent},
                     {"replay", c.replay},
                     {"env", c.env},
                     {"remote_address", c.remote_address},
                     {"output_dir", c.output_dir},
                     {"checkpoint_every", c.checkpoint_every},
                     {"record_wall_clock", c.record_wall_clock}};
}

inline void from_json(const nlohmann::json& j, RunConfig& c) {
  static const char* known[] = {"algorithm", "episodes",    "seed",
                                "scenario",  "agent",       "replay",
                                "env",       "remote_address", "output_dir",
                                "checkpoint_every", "record_wall_clock"};
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || item.key() == k;
    if (!ok) throw std::invalid_argument("RunConfig: unknown field '" + item.key() + "'");
  }
  RunConfig d;
  c.algorithm = agents::algorithm_from_string(j.value("algorithm", agents::to_string(d.algorithm)));
  c.episodes = j.value("episodes", d.episodes);
  c.seed = j.value("seed", d.seed);
  c.scenario = j.value("scenario", d.scenario);
  c.agent = j.value("agent", d.agent);
  c.replay = j.value("replay", d.replay);
  c.env = j.value("env", d.env);
  c.remote_address = j.value("remote_address", d.remote_address);
  c.output_dir = j.value("output_dir", d.output_dir);
  c.checkpoint_every = j.value("checkpoint_every", d.checkpoint_every);
  c.record_wall_clock = j.value("record_wall_clock", d.record_wall_clock);
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("config " + path.string() + ": " + e.what());
  }
  RunConfig cfg = j.get<RunConfig>();
  cfg.validate();
  return cfg;
}

struct EpisodeRecord {
  int episode = 0;
  double ret = 0.0;
  int steps = 0;
  Termination termination = Termination::Running;
  Zone zone = Zone::None;
  double wall_ms = 0.0;
  double avg50 = 0.0;
};

inline std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline constexpr const char* kMetricsHeader = "episode,return,steps,termination,zone,wall_ms,avg50";

inline std::string csv_row(const EpisodeRecord& r) {
  std::ostringstream os;
  os << r.episode << ',' << format_number(r.ret) << ',' << r.steps << ','
     << to_string(r.termination) << ',' << to_string(r.zone) << ','
     << format_number(r.wall_ms) << ',' << format_number(r.avg50);
  return os.str();
}

inline std::vector<EpisodeRecord> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metrics file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("metrics file " + path.string() + " is empty");
  if (line != kMetricsHeader) throw std::runtime_error("metrics file has an unexpected header");
  std::vector<EpisodeRecord> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 7) {
      throw std::runtime_error("metrics line " + std::to_string(lineno) + ": expected 7 fields");
    }
    try {
      EpisodeRecord r;
      r.episode = std::stoi(f[0]);
      r.ret = std::stod(f[1]);
      r.steps = std::stoi(f[2]);
      r.termination = termination_from_string(f[3]);
      r.zone = zone_from_string(f[4]);
      r.wall_ms = std::stod(f[5]);
      r.avg50 = std::stod(f[6]);
      rows.push_back(r);
    } catch (const std::exception& e) {
      throw std::runtime_error("metrics line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (rows.empty()) throw std::runtime_error("metrics file " + path.string() + " has no rows");
  return rows;
}

// Mean of values[max(0, k-window+1) .. k] for every k.
inline std::vector<double> moving_average(const std::vector<double>& values,
                                          std::size_t window = kAverageWindow) {
  std::vector<double> out(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    const std::size_t first = k + 1 >= window ? k + 1 - window : 0;
    double sum = 0.0;
    for (std::size_t i = first; i <= k; ++i) sum += values[i];
    out[k] = sum / static_cast<double>(k + 1 - first);
  }
  return out;
}

// Mean return of the zero-command policy, which drops straight down from the
// start point. Baseline for the convergence threshold.
inline double scripted_baseline_return(const ScenarioConfig& scenario, int episodes = 1000,
                                       std::uint64_t seed = 20240101) {
  LandingEnv env(scenario);
  Rng rng(seed);
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    env.reset(rng);
    StepOutcome out;
    do {
      out = env.step({0.0, 0.0});
      total += out.reward;
    } while (!out.done);
  }
  return total / episodes;
}

inline constexpr double kConvergenceMargin = 10.0;

inline double convergence_threshold(const ScenarioConfig& scenario) {
  return scripted_baseline_return(scenario) + kConvergenceMargin;
}

// First episode (1-based) whose full 50-episode moving average exceeds the
// threshold.
inline std::optional<int> convergence_episode(const std::vector<EpisodeRecord>& records,
                                              double threshold) {
  for (const auto& r : records) {
    if (r.episode >= static_cast<int>(kAverageWindow) && r.avg50 > threshold) return r.episode;
  }
  return std::nullopt;
}

struct RunSummary {
  std::vector<EpisodeRecord> records;
  std::optional<int> converged_at;
  double threshold = 0.0;
  bool parameters_finite = true;
  std::filesystem::path checkpoint;
  std::filesystem::path metrics;
};

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline nlohmann::json run_checkpoint(const agents::Agent& agent, const ScenarioConfig& scenario) {
  nlohmann::json j = agents::checkpoint_json(agent);
  j["scenario"] = scenario;
  return j;
}

using EnvFactory = std::function<std::unique_ptr<Environment>(const RunConfig&)>;

inline std::unique_ptr<Environment> builtin_env(const RunConfig& cfg) {
  return std::make_unique<LandingEnv>(cfg.scenario);
}

using EpisodeCallback = std::function<void(const EpisodeRecord&)>;

// Off-policy training loop: explore, store, one learn call per environment
// step once the buffer holds `warmup` transitions. Metrics are flushed after
// every episode so an aborted run keeps its completed episodes.
inline RunSummary train(const RunConfig& cfg, const EnvFactory& make_env = builtin_env,
                        const EpisodeCallback& on_episode = {}) {
  namespace fs = std::filesystem;
  cfg.validate();
  const fs::path out_dir = cfg.output_dir;
  fs::create_directories(out_dir / "checkpoints");
  write_json_file(out_dir / "config.json", nlohmann::json(cfg));

  RunSummary summary;
  summary.metrics = out_dir / "metrics.csv";
  summary.threshold = convergence_threshold(cfg.scenario);
  std::ofstream metrics(summary.metrics, std::ios::trunc);
  if (!metrics) throw std::runtime_error("cannot write " + summary.metrics.string());
  metrics << kMetricsHeader << '\n';
  metrics.flush();

  Rng master(cfg.seed);
  const std::uint64_t agent_seed = master();
  const std::uint64_t replay_seed = master();
  auto agent = agents::make_agent(cfg.algorithm, cfg.agent, agent_seed);
  ReplayBuffer buffer(cfg.replay.capacity, replay_seed);
  const std::size_t learn_after = std::max(cfg.replay.warmup, cfg.agent.batch);
  std::unique_ptr<Environment> env = make_env(cfg);

  std::vector<double> returns;
  for (int ep = 1; ep <= cfg.episodes; ++ep) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t episode_seed = master();
    Observation obs = observe(env->reset(episode_seed));
    EpisodeRecord rec;
    rec.episode = ep;
    StepOutcome out;
    do {
      const ActionCmd a = agent->act(obs, true);
      out = env->step(a);
      const Observation next = observe(out.next_state);
      buffer.push({obs, {a.a_x, a.a_y}, out.reward, next, out.done});
      rec.ret += out.reward;
      ++rec.steps;
      if (buffer.size() >= learn_after) {
        const auto batch = buffer.sample(cfg.agent.batch);
        agent->learn(std::span<const Transition>(batch));
      }
      obs = next;
    } while (!out.done);
    rec.termination = out.termination;
    rec.zone = out.zone;
    if (cfg.record_wall_clock) {
      rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    }
    returns.push_back(rec.ret);
    rec.avg50 = moving_average(returns).back();
    summary.records.push_back(rec);
    metrics << csv_row(rec) << '\n';
    metrics.flush();
    if (on_episode) on_episode(rec);
    if (ep % cfg.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "ep_%06d.json", ep);
      write_json_file(out_dir / "checkpoints" / name, run_checkpoint(*agent, cfg.scenario));
    }
  }

  summary.parameters_finite = agent->parameters_finite();
  summary.converged_at = convergence_episode(summary.records, summary.threshold);
  summary.checkpoint = out_dir / "checkpoint.json";
  write_json_file(summary.checkpoint, run_checkpoint(*agent, cfg.scenario));
  nlohmann::json s{{"algorithm", agents::to_string(cfg.algorithm)},
                   {"episodes", cfg.episodes},
                   {"seed", cfg.seed},
                   {"threshold", summary.threshold},
                   {"parameters_finite", summary.parameters_finite}};
  s["converged_at"] = summary.converged_at ? nlohmann::json(*summary.converged_at) : nlohmann::json();
  write_json_file(out_dir / "summary.json", s);
  return summary;
}

struct EvalSummary {
  int episodes = 0;
  double success_rate = 0.0;
  double red_rate = 0.0;
  double mean_return = 0.0;
  double mean_terminal_speed = 0.0;
};

inline nlohmann::json to_json_value(const EvalSummary& e) {
  return {{"episodes", e.episodes},
          {"success_rate", e.success_rate},
          {"red_rate", e.red_rate},
          {"mean_return", e.mean_return},
          {"mean_terminal_speed", e.mean_terminal_speed}};
}

// Greedy (exploration-off) rollouts.
inline EvalSummary evaluate(agents::Agent& agent, Environment& env, int episodes,
                            std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("evaluate: episodes must be >= 1");
  Rng rng(seed);
  EvalSummary s;
  s.episodes = episodes;
  int success = 0, red = 0;
  for (int e = 0; e < episodes; ++e) {
    Observation obs = observe(env.reset(rng()));
    StepOutcome out;
    double ret = 0.0;
    do {
      out = env.step(agent.act(obs, false));
      ret += out.reward;
      obs = observe(out.next_state);
    } while (!out.done);
    if (is_pad_landing(out.zone)) ++success;
    if (out.zone == Zone::Red) ++red;
    const VehicleState& v = out.next_state;
    s.mean_terminal_speed += std::sqrt(v.v_x * v.v_x + v.v_y * v.v_y + v.v_z * v.v_z);
    s.mean_return += ret;
  }
  s.success_rate = static_cast<double>(success) / episodes;
  s.red_rate = static_cast<double>(red) / episodes;
  s.mean_return /= episodes;
  s.mean_terminal_speed /= episodes;
  return s;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

// Loads a checkpoint and evaluates it on the builtin simulator configured
// from the checkpoint's scenario block. `expected` guards against evaluating
// a checkpoint of a different algorithm.
inline EvalSummary evaluate_checkpoint(const std::filesystem::path& path, int episodes,
                                       std::uint64_t seed,
                                       std::optional<Algorithm> expected = std::nullopt) {
  if (episodes < 1) throw std::invalid_argument("evaluate: episodes must be >= 1");
  const nlohmann::json j = read_json_file(path);
  auto agent = agents::agent_from_checkpoint(j);
  if (expected && *expected != agent->algorithm()) {
    throw std::runtime_error("checkpoint algorithm '" + agents::to_string(agent->algorithm()) +
                             "' does not match requested '" + agents::to_string(*expected) + "'");
  }
  ScenarioConfig scenario = j.value("scenario", ScenarioConfig{});
  LandingEnv env(scenario);
  return evaluate(*agent, env, episodes, seed);
}

}  // namespace harness
}  // namespace uavland
