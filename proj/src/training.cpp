#include "doa/training.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "doa/csv.hpp"

namespace doa {

void TrainSchedule::validate() const {
  if (total_steps < 0 || warmup_steps < 0) throw ConfigError("step counts must be >= 0");
  if (eval_every < 1 || eval_episodes < 1) throw ConfigError("evaluation schedule must be positive");
  if (updates_per_step < 0) throw ConfigError("updates_per_step must be >= 0");
}

void to_json(nlohmann::json& j, const TrainSchedule& s) {
  j = nlohmann::json{{"total_steps", s.total_steps},
                     {"warmup_steps", s.warmup_steps},
                     {"eval_every", s.eval_every},
                     {"eval_episodes", s.eval_episodes},
                     {"updates_per_step", s.updates_per_step}};
}

void from_json(const nlohmann::json& j, TrainSchedule& s) {
  if (j.contains("total_steps")) j.at("total_steps").get_to(s.total_steps);
  if (j.contains("warmup_steps")) j.at("warmup_steps").get_to(s.warmup_steps);
  if (j.contains("eval_every")) j.at("eval_every").get_to(s.eval_every);
  if (j.contains("eval_episodes")) j.at("eval_episodes").get_to(s.eval_episodes);
  if (j.contains("updates_per_step")) j.at("updates_per_step").get_to(s.updates_per_step);
}

EpisodeResult run_episode(Environment& env, const Policy& policy, int history, std::uint64_t seed,
                          std::ostream* trace) {
  EpisodeResult result;
  std::vector<Observation> observations;
  observations.push_back(env.reset(seed));
  const int d = env.observation_size();
  if (trace) {
    write_trace_header(*trace, env);
    write_trace_row(*trace, env, 0.0, 0.0, {});
  }
  while (!env.done()) {
    const int t = env.step_index();
    const History h = make_history(observations, t, history, d);
    const double action = policy(observations.back(), h);
    const StepResult r = env.step(action);
    result.episode_return += r.reward;
    result.passes += static_cast<int>(r.events.size());
    for (const auto& e : r.events) result.violations += e.violation ? 1 : 0;
    ++result.steps;
    observations.push_back(r.observation);
    if (trace) write_trace_row(*trace, env, action, r.reward, r.events);
  }
  return result;
}

EvalPoint evaluate(const EnvConfig& cfg, std::shared_ptr<const StepModel> predictor, Agent* agent,
                   int episodes, std::uint64_t seed) {
  Environment env(cfg, std::move(predictor));
  Rng random_actions(derive_seed(seed, 0x72616e64));
  Policy policy;
  int history = 10;
  if (agent) {
    history = agent->config().history;
    policy = [agent](const Observation& o, const History& h) { return agent->act(o, h, false); };
  } else {
    policy = [&random_actions](const Observation&, const History&) {
      return uniform(random_actions, -1.0, 1.0);
    };
  }
  EvalPoint p;
  for (int k = 0; k < episodes; ++k)
    p.returns.push_back(
        run_episode(env, policy, history, derive_seed(seed, 0xe7a1, static_cast<std::uint64_t>(k)))
            .episode_return);
  const double n = static_cast<double>(p.returns.size());
  p.mean_return = std::accumulate(p.returns.begin(), p.returns.end(), 0.0) / n;
  double ss = 0.0;
  for (double r : p.returns) ss += (r - p.mean_return) * (r - p.mean_return);
  p.std_return = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
  return p;
}

void write_metric_log(const std::filesystem::path& path, const std::vector<EvalPoint>& evals) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "env_step,mean_eval_return,std_eval_return\n" << std::setprecision(12);
  for (const auto& e : evals) os << e.env_step << ',' << e.mean_return << ',' << e.std_return << '\n';
}

std::vector<EvalPoint> read_metric_log(const std::filesystem::path& path) {
  const auto table = CsvTable::read(path);
  const auto steps = table.column("env_step");
  const auto means = table.column("mean_eval_return");
  const auto stds = table.column("std_eval_return");
  std::vector<EvalPoint> out(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    out[i].env_step = static_cast<long>(steps[i]);
    out[i].mean_return = means[i];
    out[i].std_return = stds[i];
  }
  return out;
}

TrainLog train_loop(const EnvConfig& cfg, std::shared_ptr<const StepModel> predictor, Agent& agent,
                    const TrainSchedule& schedule, std::uint64_t seed, const TrainOutputs& outputs) {
  schedule.validate();
  Environment env(cfg, predictor);
  if (env.observation_size() != agent.observation_size())
    throw ConfigError("agent observation size does not match the environment");
  const AlgoConfig& acfg = agent.config();
  const int l = acfg.history;
  const int d = env.observation_size();
  ReplayBuffer buffer(std::min<long>(acfg.buffer_size, std::max<long>(schedule.total_steps, 1)), d, l);
  Rng rng(derive_seed(seed, 0x6c6f6f70));
  const std::uint64_t eval_seed = derive_seed(seed, 0x6576616c);

  TrainLog log;
  auto record = [&](EvalPoint p) {
    log.evals.push_back(p);
    if (outputs.metric_log) write_metric_log(*outputs.metric_log, log.evals);
    if (outputs.on_eval) outputs.on_eval(p);
  };

  try {
    EvalPoint baseline = evaluate(cfg, predictor, nullptr, schedule.eval_episodes, eval_seed);
    baseline.env_step = 0;
    record(baseline);

    long episode = 0;
    std::vector<Observation> observations{env.reset(derive_seed(seed, 0x657069, 0))};
    for (long step = 1; step <= schedule.total_steps; ++step) {
      const int t = env.step_index();
      Transition tr;
      tr.history = make_history(observations, t, l, d);
      tr.observation = observations.back();
      tr.action = step <= schedule.warmup_steps ? uniform(rng, -1.0, 1.0)
                                                : agent.act(tr.observation, tr.history, true);
      const StepResult r = env.step(tr.action);
      tr.reward = r.reward;
      tr.next_observation = r.observation;
      tr.done = false;  // episodes end by time limit only; bootstrap through it
      buffer.add(tr);
      observations.push_back(r.observation);
      log.env_steps = step;

      if (step > schedule.warmup_steps && buffer.size() >= acfg.batch_size) {
        for (int u = 0; u < schedule.updates_per_step; ++u) {
          agent.update(buffer.sample(acfg.batch_size, rng));
          ++log.updates;
        }
      }

      if (r.done) {
        ++episode;
        observations.assign(1, env.reset(derive_seed(seed, 0x657069, static_cast<std::uint64_t>(episode))));
      }
      if (step % schedule.eval_every == 0 || step == schedule.total_steps) {
        EvalPoint p = evaluate(cfg, predictor, &agent, schedule.eval_episodes, eval_seed);
        p.env_step = step;
        record(p);
      }
    }
  } catch (...) {
    if (outputs.metric_log) write_metric_log(*outputs.metric_log, log.evals);
    throw;
  }
  if (outputs.checkpoint) agent.save(*outputs.checkpoint);
  return log;
}

}  // namespace doa
