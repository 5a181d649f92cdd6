#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "doa/harness.hpp"

namespace fs = std::filesystem;
using namespace doa;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> runs;
  std::optional<std::string> out, mode, algo, behavior;
  std::optional<std::string> predictor, checkpoint;
  std::optional<int> episodes;
  bool resume = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "experiment config (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--runs", o.runs, "independent runs")->check(CLI::PositiveNumber);
  cmd->add_option("--out", o.out, "output directory (relative paths go under $DOA_OUTPUT_ROOT)");
  cmd->add_option("--mode", o.mode, "observation variant")->check(CLI::IsMember({"sl", "baseline"}));
  cmd->add_option("--algo", o.algo, "RL algorithm")->check(CLI::IsMember({"td3", "sac"}));
  cmd->add_option("--behavior", o.behavior, "obstacle behavior")
      ->check(CLI::IsMember({"stochastic", "periodic", "linear"}));
  cmd->add_option("--predictor", o.predictor, "predictor checkpoint");
}

ExperimentConfig build_config(const Overrides& o) {
  ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : load_experiment_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.runs) c.runs = *o.runs;
  if (o.out) c.output_dir = *o.out;
  if (o.mode) c.mode = mode_from_string(*o.mode);
  if (o.algo) c.algo = algorithm_from_string(*o.algo);
  if (o.behavior) c.behavior = behavior_from_string(*o.behavior);
  if (o.predictor) c.predictor_checkpoint = *o.predictor;
  if (o.checkpoint) c.agent_checkpoint = *o.checkpoint;
  if (o.episodes) c.eval_episodes = *o.episodes;
  if (o.resume) c.resume = true;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic obstacle avoidance experiments: trajectory predictors, collision risk and recurrent RL agents"};
  app.require_subcommand(1);
  Overrides o;

  auto* train_pred = app.add_subcommand("train-predictor", "generate trajectories and train the one-step predictor");
  add_common(train_pred, o);
  auto* eval_pred = app.add_subcommand("eval-predictor", "RMSE-by-horizon quantiles and prediction overlays");
  add_common(eval_pred, o);
  auto* train_agent = app.add_subcommand("train-agent", "seeded multi-run RL training with aggregated learning curves");
  add_common(train_agent, o);
  train_agent->add_flag("--resume", o.resume, "reuse runs that already finished with the same config");
  auto* eval_agent = app.add_subcommand("eval-agent", "deterministic episodes with trajectory plots");
  add_common(eval_agent, o);
  eval_agent->add_option("--checkpoint", o.checkpoint, "agent checkpoint")->required();
  eval_agent->add_option("--episodes", o.episodes, "evaluation episodes")->check(CLI::PositiveNumber);

  auto* plot_cmd = app.add_subcommand("plot", "re-render figures from their data files");
  std::vector<std::string> inputs;
  std::optional<std::string> plot_out;
  plot_cmd->add_option("inputs", inputs, "data files or directories")->required();
  plot_cmd->add_option("--out", plot_out, "directory for the SVG files (default: next to the data)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_pred->parsed()) {
      const auto r = cmd_train_predictor(build_config(o));
      std::cout << "checkpoint " << r.checkpoint.string() << "\nepochs " << r.epochs
                << "\nbest validation MSE " << r.final_validation_mse << " m^2\nseconds "
                << r.seconds << '\n';
    } else if (eval_pred->parsed()) {
      const auto r = cmd_eval_predictor(build_config(o));
      std::cout << "one-step RMSE " << r.one_step_rmse << " m\nmedian error h=1 "
                << r.horizon.q50.front() << " m\nmedian error h=" << r.horizon.q50.size() << ' '
                << r.horizon.q50.back() << " m\n";
    } else if (train_agent->parsed()) {
      const auto r = cmd_train_agent(build_config(o));
      std::cout << r.label << ": random policy " << r.random_return << ", final "
                << r.final_return << " (" << r.directory.string() << ")\n";
      for (const auto& run : r.runs)
        if (!run.ok) return 2;
    } else if (eval_agent->parsed()) {
      const auto r = cmd_eval_agent(build_config(o));
      for (std::size_t k = 0; k < r.returns.size(); ++k)
        std::cout << "episode " << k << " return " << r.returns[k] << '\n';
      std::cout << "mean return " << r.mean_return << " (" << r.directory.string() << ")\n";
    } else if (plot_cmd->parsed()) {
      std::vector<fs::path> paths(inputs.begin(), inputs.end());
      std::optional<fs::path> out;
      if (plot_out) out = fs::path(*plot_out);
      std::cout << cmd_plot(paths, out) << " figures written\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
