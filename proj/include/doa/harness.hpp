#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "doa/environment.hpp"
#include "doa/rl_agents.hpp"
#include "doa/training.hpp"
#include "doa/trajectory_predictor.hpp"

namespace doa {

/// Environment variable that relocates every relative output directory.
inline constexpr const char* kOutputRootVar = "DOA_OUTPUT_ROOT";

struct PredictorData {
  int train_count = 1000;
  int test_count = 200;
  int length = 200;
  int horizon = 100;
  int overlay_count = 4;
};

struct ExperimentConfig {
  BehaviorKind behavior = BehaviorKind::stochastic;
  ObservationMode mode = ObservationMode::sl;
  Algorithm algo = Algorithm::td3;
  int runs = 3;
  std::uint64_t seed = 1;
  std::filesystem::path output_dir;  ///< empty: a per-command default under the output root
  EnvConfig env;
  AlgoConfig algo_config;
  TrainSchedule schedule;
  PredictorConfig predictor;
  PredictorData predictor_data;
  std::filesystem::path predictor_checkpoint;
  std::filesystem::path agent_checkpoint;
  int eval_episodes = 3;
  bool resume = false;  ///< reuse runs whose snapshot and outputs already exist

  /// Copies behavior and mode into the environment config.
  EnvConfig environment() const;
  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// DOA_OUTPUT_ROOT if set, otherwise "runs".
std::filesystem::path output_root();
/// Absolute output dirs are kept; relative ones are placed under output_root().
std::filesystem::path resolve_output(const std::filesystem::path& dir);

/// "SL-LSTM-TD3", "LSTM-SAC", ...
std::string variant_label(ObservationMode mode, Algorithm algo);

struct PredictorReport {
  std::filesystem::path checkpoint;
  double final_validation_mse = 0.0;
  int epochs = 0;
  double seconds = 0.0;
};

struct PredictorEvaluation {
  double one_step_rmse = 0.0;
  HorizonQuantiles horizon;
};

struct AgentRunSummary {
  int run = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::vector<EvalPoint> log;
  double seconds = 0.0;
};

struct TrainAgentReport {
  std::string label;
  std::vector<AgentRunSummary> runs;
  /// Point-wise aggregate over completed runs.
  std::vector<long> steps;
  std::vector<double> mean, lower, upper;
  double random_return = 0.0;  ///< mean step-0 evaluation over completed runs
  double final_return = 0.0;   ///< mean of the last evaluation over completed runs
  std::filesystem::path directory;
};

struct EvalAgentReport {
  std::vector<double> returns;
  std::vector<int> violations;
  double mean_return = 0.0;
  std::filesystem::path directory;
};

PredictorReport cmd_train_predictor(const ExperimentConfig& cfg);
/// Refuses checkpoints trained on a different behavior.
PredictorEvaluation cmd_eval_predictor(const ExperimentConfig& cfg);
TrainAgentReport cmd_train_agent(const ExperimentConfig& cfg);
EvalAgentReport cmd_eval_agent(const ExperimentConfig& cfg);
/// Re-renders the figure of each data file (or every .csv in a directory).
int cmd_plot(const std::vector<std::filesystem::path>& inputs,
             const std::optional<std::filesystem::path>& out_dir);

/// Mean and normal-approximation 95% band (mean +/- 1.96 std / sqrt(N)).
struct BandPoint {
  double mean, lower, upper;
};
BandPoint confidence_band(const std::vector<double>& values);

/// Writes rows "label,env_step,mean,lower,upper,runs" for several reports.
void write_learning_curves(const std::filesystem::path& path,
                           const std::vector<TrainAgentReport>& reports);

/// Loads the predictor a config refers to; checks the behavior tag.
std::shared_ptr<const PredictorModel> load_predictor_for(const ExperimentConfig& cfg);

}  // namespace doa
