#include "doa/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>

#include "doa/collision_risk.hpp"
#include "doa/csv.hpp"
#include "doa/plot.hpp"

namespace fs = std::filesystem;

namespace doa {
namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << std::setprecision(10);
  return os;
}

fs::path default_dir(const ExperimentConfig& cfg, const std::string& fallback) {
  return resolve_output(cfg.output_dir.empty() ? fs::path(fallback) : cfg.output_dir);
}

std::string predictor_dir_name(BehaviorKind b) { return "predictor-" + std::string(to_string(b)); }

fs::path predictor_path(const ExperimentConfig& cfg) {
  if (!cfg.predictor_checkpoint.empty()) return resolve_output(cfg.predictor_checkpoint);
  return resolve_output(predictor_dir_name(cfg.behavior)) / "predictor.json";
}

std::string agent_dir_name(const ExperimentConfig& cfg) {
  return "agent-" + std::string(to_string(cfg.mode)) + "-" + std::string(to_string(cfg.algo)) + "-" +
         std::string(to_string(cfg.behavior));
}

TrajectorySamplerConfig sampler(const ExperimentConfig& cfg, int count, std::uint64_t salt) {
  TrajectorySamplerConfig s;
  s.behavior = cfg.behavior;
  s.dynamics = cfg.env.dynamics;
  s.dynamics.dt = cfg.env.dt;
  s.v_x_max = cfg.env.v_x_max;
  s.v_y_max = cfg.env.v_y_max;
  s.count = count;
  s.length = cfg.predictor_data.length;
  s.seed = derive_seed(cfg.seed, salt);
  return s;
}

constexpr std::uint64_t kTrainSalt = 0x747261696e;
constexpr std::uint64_t kTestSalt = 0x74657374;

// Observed window, actual continuation and predicted rollout for a few
// held-out trajectories.
void write_overlay(const StepModel& model, std::span<const Trajectory> tests, int count,
                   int horizon, const fs::path& dir) {
  const fs::path data = dir / "prediction_overlay.csv";
  {
    auto os = open_out(data);
    os << "trajectory,kind,step,x,y\n";
    const int h = model.window();
    int written = 0;
    for (std::size_t i = 0; i < tests.size() && written < count; ++i) {
      const auto& traj = tests[i];
      if (static_cast<int>(traj.size()) < h + horizon) continue;
      const auto pred = rollout(model, std::span(traj).first(static_cast<std::size_t>(h)), horizon,
                                Direction::forward);
      for (int k = 0; k < h; ++k)
        os << i << ",observed," << k << ',' << traj[k].x() << ',' << traj[k].y() << '\n';
      for (int k = h - 1; k < h + horizon; ++k)
        os << i << ",actual," << k << ',' << traj[k].x() << ',' << traj[k].y() << '\n';
      os << i << ",predicted," << h - 1 << ',' << traj[h - 1].x() << ',' << traj[h - 1].y() << '\n';
      for (int k = 0; k < horizon; ++k)
        os << i << ",predicted," << h + k << ',' << pred[k].x() << ',' << pred[k].y() << '\n';
      ++written;
    }
  }
  plot::prediction_overlay(data, dir / "prediction_overlay.svg");
}

// A synthetic encounter: the agent is placed so that it meets a held-out
// trajectory about 20 steps after the observed window.
void write_distance_example(const StepModel& model, const Trajectory& traj, const EnvConfig& env,
                            const fs::path& dir) {
  const int h = model.window();
  CRConfig cr = env.cr;
  cr.dt = env.dt;
  const int now = 100;
  if (static_cast<int>(traj.size()) < now + 21) return;
  AgentState agent;
  agent.velocity = Vec2(2.0, 0.0);
  agent.position = traj[now + 20] - agent.velocity * (20.0 * env.dt) + Vec2(0.0, 30.0);
  const auto window = std::span(traj).subspan(static_cast<std::size_t>(now - h + 1), static_cast<std::size_t>(h));
  const auto detail = collision_risk_detail(model, window, agent, cr);
  const fs::path data = dir / "distance_curve.csv";
  {
    auto os = open_out(data);
    write_distance_dump(os, 0, detail);
  }
  plot::distance_curve(data, dir / "distance_curve.svg");
}

void write_horizon_table(const fs::path& path, const HorizonQuantiles& q) {
  auto os = open_out(path);
  os << "horizon,q25,q50,q75,q90,rmse\n";
  for (std::size_t k = 0; k < q.q50.size(); ++k)
    os << k + 1 << ',' << q.q25[k] << ',' << q.q50[k] << ',' << q.q75[k] << ',' << q.q90[k] << ','
       << q.rmse[k] << '\n';
}

}  // namespace

EnvConfig ExperimentConfig::environment() const {
  EnvConfig e = env;
  e.behavior = behavior;
  e.mode = mode;
  e.dynamics.dt = e.dt;
  e.cr.dt = e.dt;
  return e;
}

void ExperimentConfig::validate() const {
  if (runs < 1) throw ConfigError("runs must be >= 1");
  if (eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
  if (predictor_data.train_count < 1 || predictor_data.test_count < 1)
    throw ConfigError("trajectory counts must be positive");
  if (predictor_data.length < kWindowLength + 1) throw ConfigError("trajectory length too short");
  if (predictor_data.horizon < 1) throw ConfigError("horizon must be positive");
  environment().validate();
  algo_config.validate();
  schedule.validate();
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = nlohmann::json{{"behavior", to_string(c.behavior)},
                     {"mode", to_string(c.mode)},
                     {"algo", to_string(c.algo)},
                     {"runs", c.runs},
                     {"seed", c.seed},
                     {"output_dir", c.output_dir.string()},
                     {"env", c.env},
                     {"algo_config", c.algo_config},
                     {"schedule", c.schedule},
                     {"predictor",
                      {{"hidden", c.predictor.hidden},
                       {"dense", c.predictor.dense},
                       {"learning_rate", c.predictor.learning_rate},
                       {"batch_size", c.predictor.batch_size},
                       {"max_epochs", c.predictor.max_epochs},
                       {"patience", c.predictor.patience},
                       {"validation_fraction", c.predictor.validation_fraction}}},
                     {"predictor_data",
                      {{"train_count", c.predictor_data.train_count},
                       {"test_count", c.predictor_data.test_count},
                       {"length", c.predictor_data.length},
                       {"horizon", c.predictor_data.horizon},
                       {"overlay_count", c.predictor_data.overlay_count}}},
                     {"predictor_checkpoint", c.predictor_checkpoint.string()},
                     {"agent_checkpoint", c.agent_checkpoint.string()},
                     {"eval_episodes", c.eval_episodes}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  if (j.contains("behavior")) c.behavior = behavior_from_string(j.at("behavior").get<std::string>());
  if (j.contains("mode")) c.mode = mode_from_string(j.at("mode").get<std::string>());
  if (j.contains("algo")) c.algo = algorithm_from_string(j.at("algo").get<std::string>());
  if (j.contains("runs")) j.at("runs").get_to(c.runs);
  if (j.contains("seed")) j.at("seed").get_to(c.seed);
  if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
  if (j.contains("env")) from_json(j.at("env"), c.env);
  if (j.contains("algo_config")) from_json(j.at("algo_config"), c.algo_config);
  if (j.contains("schedule")) from_json(j.at("schedule"), c.schedule);
  if (j.contains("predictor")) {
    const auto& p = j.at("predictor");
    auto get = [&p](const char* key, auto& field) {
      if (p.contains(key)) p.at(key).get_to(field);
    };
    get("hidden", c.predictor.hidden);
    get("dense", c.predictor.dense);
    get("learning_rate", c.predictor.learning_rate);
    get("batch_size", c.predictor.batch_size);
    get("max_epochs", c.predictor.max_epochs);
    get("patience", c.predictor.patience);
    get("validation_fraction", c.predictor.validation_fraction);
  }
  if (j.contains("predictor_data")) {
    const auto& p = j.at("predictor_data");
    auto get = [&p](const char* key, int& field) {
      if (p.contains(key)) p.at(key).get_to(field);
    };
    get("train_count", c.predictor_data.train_count);
    get("test_count", c.predictor_data.test_count);
    get("length", c.predictor_data.length);
    get("horizon", c.predictor_data.horizon);
    get("overlay_count", c.predictor_data.overlay_count);
  }
  if (j.contains("predictor_checkpoint"))
    c.predictor_checkpoint = j.at("predictor_checkpoint").get<std::string>();
  if (j.contains("agent_checkpoint")) c.agent_checkpoint = j.at("agent_checkpoint").get<std::string>();
  if (j.contains("eval_episodes")) j.at("eval_episodes").get_to(c.eval_episodes);
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  return j.get<ExperimentConfig>();
}

fs::path output_root() {
  const char* v = std::getenv(kOutputRootVar);
  return v && *v ? fs::path(v) : fs::path("runs");
}

fs::path resolve_output(const fs::path& dir) {
  return dir.is_absolute() ? dir : output_root() / dir;
}

std::string variant_label(ObservationMode mode, Algorithm algo) {
  return std::string(mode == ObservationMode::sl ? "SL-" : "") + "LSTM-" +
         (algo == Algorithm::td3 ? "TD3" : "SAC");
}

BandPoint confidence_band(const std::vector<double>& values) {
  if (values.empty()) return {std::nan(""), std::nan(""), std::nan("")};
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return {mean, mean, mean};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double half = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  return {mean, mean - half, mean + half};
}

std::shared_ptr<const PredictorModel> load_predictor_for(const ExperimentConfig& cfg) {
  const fs::path path = predictor_path(cfg);
  if (!fs::exists(path))
    throw ConfigError("predictor checkpoint not found: " + path.string() +
                      " (run train-predictor first or set predictor_checkpoint)");
  auto model = std::make_shared<PredictorModel>(PredictorModel::load(path));
  if (model->behavior() != cfg.behavior)
    throw ConfigError("predictor was trained on '" + std::string(to_string(model->behavior())) +
                      "' trajectories but the experiment uses '" +
                      std::string(to_string(cfg.behavior)) + "'");
  return model;
}

PredictorReport cmd_train_predictor(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const fs::path dir = default_dir(cfg, predictor_dir_name(cfg.behavior));
  fs::create_directories(dir);
  write_json_file(dir / "config.json", nlohmann::json(cfg));

  const auto trajs = sample_trajectories(sampler(cfg, cfg.predictor_data.train_count, kTrainSalt));
  const auto data = make_training_set(trajs, kWindowLength, cfg.behavior);
  PredictorConfig pc = cfg.predictor;
  pc.seed = derive_seed(cfg.seed, 0x707265);

  const fs::path loss_csv = dir / "loss.csv";
  auto loss = open_out(loss_csv);
  loss << "epoch,train_mse,validation_mse\n";
  auto result = train_predictor(data, pc, [&](const EpochRecord& r) {
    loss << r.epoch << ',' << r.train_mse << ',' << r.validation_mse << std::endl;
    std::cerr << "[train-predictor " << to_string(cfg.behavior) << "] epoch " << r.epoch
              << " train " << r.train_mse << " val " << r.validation_mse << '\n';
  });
  loss.close();
  plot::loss_curve(loss_csv, dir / "loss.svg");

  PredictorReport report;
  report.checkpoint = dir / "predictor.json";
  result.model.save(report.checkpoint);
  report.epochs = static_cast<int>(result.log.size());
  report.final_validation_mse = result.log.at(static_cast<std::size_t>(result.best_epoch - 1)).validation_mse;

  const auto tests = sample_trajectories(sampler(cfg, cfg.predictor_data.overlay_count, kTestSalt));
  write_overlay(result.model, tests, cfg.predictor_data.overlay_count, cfg.predictor_data.horizon, dir);
  report.seconds = seconds_since(start);
  write_json_file(dir / "summary.json", {{"checkpoint", report.checkpoint.string()},
                                         {"behavior", to_string(cfg.behavior)},
                                         {"epochs", report.epochs},
                                         {"best_epoch", result.best_epoch},
                                         {"best_validation_mse", report.final_validation_mse},
                                         {"seconds", report.seconds}});
  return report;
}

PredictorEvaluation cmd_eval_predictor(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto model = load_predictor_for(cfg);
  const fs::path dir = default_dir(cfg, predictor_dir_name(cfg.behavior)) / "eval";
  fs::create_directories(dir);

  const auto tests = sample_trajectories(sampler(cfg, cfg.predictor_data.test_count, kTestSalt));
  PredictorEvaluation ev;
  ev.one_step_rmse = one_step_rmse(*model, tests);
  ev.horizon = rmse_by_horizon(*model, tests, cfg.predictor_data.horizon);
  write_horizon_table(dir / "rmse_quantiles.csv", ev.horizon);
  plot::rmse_quantiles(dir / "rmse_quantiles.csv", dir / "rmse_quantiles.svg");
  write_overlay(*model, tests, cfg.predictor_data.overlay_count, cfg.predictor_data.horizon, dir);
  write_distance_example(*model, tests.front(), cfg.environment(), dir);
  write_json_file(dir / "summary.json", {{"behavior", to_string(cfg.behavior)},
                                         {"test_trajectories", tests.size()},
                                         {"one_step_rmse", ev.one_step_rmse},
                                         {"median_rmse_h1", ev.horizon.q50.front()},
                                         {"median_rmse_hT", ev.horizon.q50.back()}});
  return ev;
}

void write_learning_curves(const fs::path& path, const std::vector<TrainAgentReport>& reports) {
  auto os = open_out(path);
  os << "label,env_step,mean,lower,upper,runs\n";
  for (const auto& r : reports) {
    int completed = 0;
    for (const auto& run : r.runs) completed += run.ok ? 1 : 0;
    for (std::size_t i = 0; i < r.steps.size(); ++i)
      os << r.label << ',' << r.steps[i] << ',' << r.mean[i] << ',' << r.lower[i] << ','
         << r.upper[i] << ',' << completed << '\n';
  }
}

TrainAgentReport cmd_train_agent(const ExperimentConfig& cfg) {
  cfg.validate();
  const EnvConfig env = cfg.environment();
  std::shared_ptr<const StepModel> predictor;
  if (cfg.mode == ObservationMode::sl) predictor = load_predictor_for(cfg);

  TrainAgentReport report;
  report.label = variant_label(cfg.mode, cfg.algo);
  report.directory = default_dir(cfg, agent_dir_name(cfg));
  fs::create_directories(report.directory);
  write_json_file(report.directory / "config.json", nlohmann::json(cfg));

  for (int r = 0; r < cfg.runs; ++r) {
    AgentRunSummary run;
    run.run = r;
    run.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(r));
    const fs::path run_dir = report.directory / ("run_" + std::to_string(r));
    ExperimentConfig snapshot = cfg;
    snapshot.seed = run.seed;
    snapshot.runs = 1;
    snapshot.output_dir = run_dir;
    const nlohmann::json snap = snapshot;
    const fs::path metrics = run_dir / "metrics.csv";
    const fs::path checkpoint = run_dir / "agent.ckpt";

    if (cfg.resume && fs::exists(run_dir / "config.json") && fs::exists(metrics) &&
        fs::exists(checkpoint) && read_json_file(run_dir / "config.json") == snap) {
      run.log = read_metric_log(metrics);
      run.ok = true;
      std::cerr << "[train-agent " << report.label << "] run " << r << " reused\n";
      report.runs.push_back(run);
      continue;
    }
    fs::create_directories(run_dir);
    const auto start = std::chrono::steady_clock::now();
    try {
      auto agent = make_agent(cfg.algo, env.observation_size(), cfg.algo_config, run.seed);
      TrainOutputs outputs;
      outputs.metric_log = metrics;
      outputs.checkpoint = checkpoint;
      outputs.on_eval = [&](const EvalPoint& p) {
        std::cerr << "[train-agent " << report.label << "] run " << r << " step " << p.env_step
                  << " return " << p.mean_return << " (sd " << p.std_return << ", "
                  << std::fixed << std::setprecision(0) << seconds_since(start) << "s)"
                  << std::defaultfloat << std::setprecision(6) << '\n';
      };
      const auto log = train_loop(env, predictor, *agent, cfg.schedule, run.seed, outputs);
      run.log = log.evals;
      run.ok = true;
      // written last so that an interrupted run is never mistaken for a finished one
      write_json_file(run_dir / "config.json", snap);
    } catch (const std::exception& e) {
      run.error = e.what();
      std::cerr << "[train-agent " << report.label << "] run " << r << " failed: " << e.what() << '\n';
      if (fs::exists(metrics)) run.log = read_metric_log(metrics);
    }
    run.seconds = seconds_since(start);
    report.runs.push_back(run);
  }

  std::vector<const AgentRunSummary*> done;
  for (const auto& run : report.runs)
    if (run.ok) done.push_back(&run);
  if (done.empty()) throw std::runtime_error("train-agent: every run failed");
  if (done.size() < report.runs.size())
    std::cerr << "[train-agent " << report.label << "] warning: aggregating " << done.size()
              << " of " << report.runs.size() << " runs\n";

  std::size_t points = done.front()->log.size();
  for (const auto* run : done) points = std::min(points, run->log.size());
  for (std::size_t i = 0; i < points; ++i) {
    std::vector<double> values;
    for (const auto* run : done) values.push_back(run->log[i].mean_return);
    const auto band = confidence_band(values);
    report.steps.push_back(done.front()->log[i].env_step);
    report.mean.push_back(band.mean);
    report.lower.push_back(band.lower);
    report.upper.push_back(band.upper);
  }
  report.random_return = report.mean.empty() ? 0.0 : report.mean.front();
  report.final_return = report.mean.empty() ? 0.0 : report.mean.back();

  write_learning_curves(report.directory / "learning_curve.csv", {report});
  plot::learning_curves(report.directory / "learning_curve.csv", report.directory / "learning_curve.svg");
  nlohmann::json summary{{"label", report.label},
                         {"random_policy_return", report.random_return},
                         {"final_return", report.final_return},
                         {"runs", nlohmann::json::array()}};
  for (const auto& run : report.runs)
    summary["runs"].push_back({{"run", run.run},
                               {"seed", run.seed},
                               {"ok", run.ok},
                               {"error", run.error},
                               {"final_return", run.log.empty() ? 0.0 : run.log.back().mean_return},
                               {"seconds", run.seconds}});
  write_json_file(report.directory / "summary.json", summary);
  return report;
}

EvalAgentReport cmd_eval_agent(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.agent_checkpoint.empty()) throw ConfigError("eval-agent needs agent_checkpoint");
  const fs::path ckpt = resolve_output(cfg.agent_checkpoint);
  auto agent = load_agent(ckpt);
  const EnvConfig env_cfg = cfg.environment();
  if (agent->observation_size() != env_cfg.observation_size())
    throw ConfigError("checkpoint expects observations of size " +
                      std::to_string(agent->observation_size()) + " but the " +
                      std::string(to_string(cfg.mode)) + " environment produces " +
                      std::to_string(env_cfg.observation_size()));
  std::shared_ptr<const StepModel> predictor;
  if (cfg.mode == ObservationMode::sl) predictor = load_predictor_for(cfg);
  Environment env(env_cfg, predictor);

  EvalAgentReport report;
  report.directory = cfg.output_dir.empty() ? ckpt.parent_path() / "eval" : resolve_output(cfg.output_dir);
  fs::create_directories(report.directory);
  const Policy policy = [&agent](const Observation& o, const History& h) { return agent->act(o, h, false); };
  auto summary = open_out(report.directory / "returns.csv");
  summary << "episode,seed,return,violations,passes\n";
  for (int k = 0; k < cfg.eval_episodes; ++k) {
    const std::uint64_t seed = derive_seed(cfg.seed, 0x65706973, static_cast<std::uint64_t>(k));
    const fs::path trace = report.directory / ("episode_" + std::to_string(k) + ".csv");
    EpisodeResult r;
    {
      auto os = open_out(trace);
      r = run_episode(env, policy, agent->config().history, seed, &os);
    }
    plot::episode_trajectories(trace, report.directory / ("episode_" + std::to_string(k) + ".svg"));
    summary << k << ',' << seed << ',' << r.episode_return << ',' << r.violations << ',' << r.passes << '\n';
    report.returns.push_back(r.episode_return);
    report.violations.push_back(r.violations);
  }
  report.mean_return = std::accumulate(report.returns.begin(), report.returns.end(), 0.0) /
                       static_cast<double>(report.returns.size());
  return report;
}

int cmd_plot(const std::vector<fs::path>& inputs, const std::optional<fs::path>& out_dir) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      for (const auto& e : fs::recursive_directory_iterator(in))
        if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
    } else if (fs::exists(in)) {
      files.push_back(in);
    } else {
      throw ConfigError("no such data file: " + in.string());
    }
  }
  int rendered = 0;
  for (const auto& f : files) {
    fs::path out = f;
    out.replace_extension(".svg");
    if (out_dir) out = *out_dir / out.filename();
    if (plot::plot_data_file(f, out)) ++rendered;
  }
  return rendered;
}

}  // namespace doa
