#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include <json.hpp>

#include "doa/environment.hpp"
#include "doa/rl_agents.hpp"

namespace doa {

struct TrainSchedule {
  long total_steps = 100'000;
  long warmup_steps = 2000;
  long eval_every = 5000;
  int eval_episodes = 5;
  int updates_per_step = 1;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainSchedule& s);
void from_json(const nlohmann::json& j, TrainSchedule& s);

struct EvalPoint {
  long env_step = 0;
  double mean_return = 0.0;
  double std_return = 0.0;
  std::vector<double> returns;
};

using Policy = std::function<double(const Observation&, const History&)>;

struct EpisodeResult {
  double episode_return = 0.0;
  int violations = 0;
  int passes = 0;
  long steps = 0;
};

/// Runs one full episode; writes a trace when `trace` is non-null.
EpisodeResult run_episode(Environment& env, const Policy& policy, int history,
                          std::uint64_t seed, std::ostream* trace = nullptr);

/// Deterministic evaluation over a fixed set of episode seeds derived from
/// `seed`. A null agent evaluates the uniform random policy.
EvalPoint evaluate(const EnvConfig& cfg, std::shared_ptr<const StepModel> predictor, Agent* agent,
                   int episodes, std::uint64_t seed);

struct TrainOutputs {
  std::optional<std::filesystem::path> metric_log;  ///< rewritten after every evaluation
  std::optional<std::filesystem::path> checkpoint;  ///< final agent checkpoint
  std::function<void(const EvalPoint&)> on_eval;
};

struct TrainLog {
  std::vector<EvalPoint> evals;
  long env_steps = 0;
  long updates = 0;
};

/// Interleaves exploration, replay insertion and one gradient update per
/// environment step after the warm-up. The first row of the log (step 0) is
/// the random-policy baseline.
TrainLog train_loop(const EnvConfig& cfg, std::shared_ptr<const StepModel> predictor, Agent& agent,
                    const TrainSchedule& schedule, std::uint64_t seed,
                    const TrainOutputs& outputs = {});

/// Rows "env_step,mean_eval_return,std_eval_return".
void write_metric_log(const std::filesystem::path& path, const std::vector<EvalPoint>& evals);
std::vector<EvalPoint> read_metric_log(const std::filesystem::path& path);

}  // namespace doa
