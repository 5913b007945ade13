#include <cstdint>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "uavland/bridge.hpp"
#include "uavland/harness.hpp"
#include "uavland/plot.hpp"

namespace {

using namespace uavland;

int run_train(const std::string& config_path, std::optional<std::uint64_t> seed,
              std::optional<std::string> algo, std::optional<std::string> out,
              std::optional<int> episodes, bool quiet) {
  harness::RunConfig cfg = harness::load_run_config(config_path);
  if (seed) cfg.seed = *seed;
  if (algo) cfg.algorithm = agents::algorithm_from_string(*algo);
  if (out) cfg.output_dir = *out;
  if (episodes) cfg.episodes = *episodes;

  harness::EnvFactory factory = harness::builtin_env;
  if (cfg.env == "remote") {
    factory = [](const harness::RunConfig& c) -> std::unique_ptr<Environment> {
      return std::make_unique<bridge::RemoteEnv>(c.remote_address, c.scenario);
    };
  }
  auto progress = [quiet](const harness::EpisodeRecord& r) {
    if (!quiet && (r.episode % 50 == 0 || r.episode == 1)) {
      std::cout << "episode " << r.episode << "  return " << r.ret << "  avg50 " << r.avg50
                << "  " << to_string(r.zone) << '\n';
    }
  };
  const harness::RunSummary s = harness::train(cfg, factory, progress);
  std::cout << "metrics:    " << s.metrics.string() << '\n'
            << "checkpoint: " << s.checkpoint.string() << '\n'
            << "threshold:  " << s.threshold << '\n'
            << "converged:  " << (s.converged_at ? std::to_string(*s.converged_at) : "no") << '\n';
  if (!s.parameters_finite) {
    std::cerr << "error: non-finite network parameters after training\n";
    return 3;
  }
  return 0;
}

int run_eval(const std::string& checkpoint, int episodes, std::uint64_t seed,
             std::optional<std::string> algo) {
  std::optional<agents::Algorithm> expected;
  if (algo) expected = agents::algorithm_from_string(*algo);
  const harness::EvalSummary e = harness::evaluate_checkpoint(checkpoint, episodes, seed, expected);
  std::cout << harness::to_json_value(e).dump(2) << '\n';
  return 0;
}

int run_serve(std::uint16_t port, const std::string& host, std::optional<std::string> config_path) {
  ScenarioConfig scenario;
  if (config_path) scenario = harness::load_run_config(*config_path).scenario;
  bridge::Server server(port, [scenario] { return std::make_unique<LandingEnv>(scenario); }, host);
  std::cout << "serving landing environment on " << host << ':' << server.port() << std::endl;
  server.run();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UAV landing reinforcement-learning suite"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "train an agent");
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> algo, out;
  std::optional<int> episodes;
  bool quiet = false;
  train->add_option("--config", config_path, "run configuration JSON")->required()->check(CLI::ExistingFile);
  train->add_option("--seed", seed, "override the seed");
  train->add_option("--algo", algo, "override the algorithm")->check(CLI::IsMember({"ddpg", "td3", "sac"}));
  train->add_option("--out", out, "override the output directory");
  train->add_option("--episodes", episodes, "override the episode count");
  train->add_flag("--quiet", quiet, "suppress per-episode progress");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint greedily");
  std::string checkpoint;
  int eval_episodes = 0;
  std::uint64_t eval_seed = 0;
  std::optional<std::string> eval_algo;
  eval->add_option("--checkpoint", checkpoint, "checkpoint JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("--episodes", eval_episodes, "number of episodes")->required();
  eval->add_option("--seed", eval_seed, "evaluation seed")->required();
  eval->add_option("--algo", eval_algo, "expected algorithm")->check(CLI::IsMember({"ddpg", "td3", "sac"}));

  auto* plot = app.add_subcommand("plot", "plot reward per episode");
  std::string metrics, image;
  plot->add_option("--metrics", metrics, "metrics CSV")->required()->check(CLI::ExistingFile);
  plot->add_option("--out", image, "output image (.png or .svg)")->required();

  auto* serve = app.add_subcommand("serve", "serve the simulator over TCP");
  std::uint16_t port = bridge::kDefaultPort;
  std::string host = "127.0.0.1";
  std::optional<std::string> serve_config;
  serve->add_option("--port", port, "TCP port");
  serve->add_option("--host", host, "bind address");
  serve->add_option("--config", serve_config, "run configuration supplying the scenario")->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return run_train(config_path, seed, algo, out, episodes, quiet);
    if (*eval) return run_eval(checkpoint, eval_episodes, eval_seed, eval_algo);
    if (*plot) {
      plot::plot_metrics(metrics, image);
      std::cout << "wrote " << image << '\n';
      return 0;
    }
    if (*serve) return run_serve(port, host, serve_config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
