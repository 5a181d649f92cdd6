#include "doa/trajectory_predictor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>

namespace doa {

TrainingSet make_training_set(std::span<const Trajectory> trajectories, int h,
                              BehaviorKind behavior) {
  if (h < 1) throw ConfigError("window length must be positive");
  TrainingSet set;
  set.window = h;
  set.behavior = behavior;

  long n = 0;
  for (const auto& traj : trajectories)
    if (static_cast<int>(traj.size()) >= h + 1) n += static_cast<long>(traj.size()) - h;

  set.inputs.resize(2L * h, n);
  set.targets.resize(2, n);
  set.source.reserve(static_cast<std::size_t>(n));
  long col = 0;
  for (std::size_t s = 0; s < trajectories.size(); ++s) {
    const auto& traj = trajectories[s];
    if (static_cast<int>(traj.size()) < h + 1) {
      ++set.skipped;
      continue;
    }
    for (std::size_t start = 0; start + h < traj.size(); ++start, ++col) {
      const Vec2 origin = traj[start + h - 1];
      for (int k = 0; k < h; ++k) set.inputs.block(2 * k, col, 2, 1) = traj[start + k] - origin;
      set.targets.col(col) = traj[start + h] - origin;
      set.source.push_back(static_cast<int>(s));
    }
  }
  if (set.skipped > 0)
    std::cerr << "make_training_set: skipped " << set.skipped << " trajectories shorter than "
              << h + 1 << " positions\n";
  return set;
}

std::vector<Vec2> ConstantVelocityModel::predict_batch(std::span<const Vec2> windows) const {
  const std::size_t h = static_cast<std::size_t>(window_);
  std::vector<Vec2> out;
  out.reserve(windows.size() / h);
  for (std::size_t b = 0; b + h <= windows.size(); b += h) {
    const Vec2& last = windows[b + h - 1];
    const Vec2 step = h >= 2 ? Vec2(last - windows[b + h - 2]) : Vec2(Vec2::Zero());
    out.push_back(last + step);
  }
  return out;
}

PredictorModel::PredictorModel(const PredictorConfig& cfg, int window, BehaviorKind behavior,
                               double scale)
    : window_(window), behavior_(behavior), scale_(scale), hidden_(cfg.hidden), dense_(cfg.dense) {
  if (!(scale > 0.0)) throw ConfigError("position scale must be positive");
  Rng rng(derive_seed(cfg.seed, 0x7072));
  lstm_ = nn::Lstm(2, cfg.hidden, rng, "lstm");
  hidden_layer_ = nn::Dense(cfg.hidden, cfg.dense, nn::Activation::relu, rng, "hidden");
  output_ = nn::Dense(cfg.dense, 2, nn::Activation::identity, rng, "output");
}

nn::Sequence PredictorModel::to_sequence(const nn::Matrix& inputs) const {
  nn::Sequence seq(static_cast<std::size_t>(window_));
  const double inv = 1.0 / scale_;
  for (int k = 0; k < window_; ++k) seq[k] = inputs.middleRows(2 * k, 2) * inv;
  return seq;
}

nn::Matrix PredictorModel::infer_relative(const nn::Matrix& inputs) const {
  const auto seq = to_sequence(inputs);
  return output_.infer(hidden_layer_.infer(lstm_.infer(seq))) * scale_;
}

nn::Matrix PredictorModel::forward_relative(const nn::Matrix& inputs) {
  const auto seq = to_sequence(inputs);
  return output_.forward(hidden_layer_.forward(lstm_.forward(seq))) * scale_;
}

void PredictorModel::backward(const nn::Matrix& doutput) {
  lstm_.backward(hidden_layer_.backward(output_.backward(doutput * scale_)));
}

std::vector<nn::Param*> PredictorModel::params() {
  std::vector<nn::Param*> out;
  lstm_.collect(out);
  hidden_layer_.collect(out);
  output_.collect(out);
  return out;
}

std::vector<Vec2> PredictorModel::predict_batch(std::span<const Vec2> windows) const {
  const long h = window_;
  const long B = static_cast<long>(windows.size()) / h;
  nn::Matrix inputs(2 * h, B);
  for (long b = 0; b < B; ++b) {
    const Vec2& origin = windows[b * h + h - 1];
    for (long k = 0; k < h; ++k) inputs.block(2 * k, b, 2, 1) = windows[b * h + k] - origin;
  }
  const nn::Matrix rel = infer_relative(inputs);
  std::vector<Vec2> out(static_cast<std::size_t>(B));
  for (long b = 0; b < B; ++b) out[b] = windows[b * h + h - 1] + Vec2(rel(0, b), rel(1, b));
  return out;
}

nlohmann::json PredictorModel::to_json() const {
  auto* self = const_cast<PredictorModel*>(this);
  nlohmann::json j;
  j["format"] = "doa-predictor";
  j["version"] = 1;
  j["window"] = window_;
  j["hidden"] = hidden_;
  j["dense"] = dense_;
  j["behavior"] = std::string(to_string(behavior_));
  j["coordinates"] = "relative-to-last-window-position";
  j["position_scale"] = scale_;
  j["params"] = nn::params_to_json(self->params());
  return j;
}

PredictorModel PredictorModel::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "doa-predictor") throw ConfigError("not a predictor checkpoint");
  PredictorConfig cfg;
  cfg.hidden = j.at("hidden").get<int>();
  cfg.dense = j.at("dense").get<int>();
  PredictorModel model(cfg, j.at("window").get<int>(),
                       behavior_from_string(j.at("behavior").get<std::string>()),
                       j.at("position_scale").get<double>());
  nn::params_from_json(model.params(), j.at("params"));
  return model;
}

void PredictorModel::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << to_json().dump();
}

PredictorModel PredictorModel::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  return from_json(nlohmann::json::parse(is));
}

namespace {

nn::Matrix gather(const nn::Matrix& m, std::span<const long> cols) {
  nn::Matrix out(m.rows(), static_cast<long>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<long>(i)) = m.col(cols[i]);
  return out;
}

double evaluate_mse(const PredictorModel& model, const TrainingSet& data,
                    std::span<const long> cols) {
  if (cols.empty()) return 0.0;
  double total = 0.0;
  constexpr std::size_t chunk = 1024;
  for (std::size_t start = 0; start < cols.size(); start += chunk) {
    const auto part = cols.subspan(start, std::min(chunk, cols.size() - start));
    const nn::Matrix pred = model.infer_relative(gather(data.inputs, part));
    total += (pred - gather(data.targets, part)).squaredNorm();
  }
  return total / static_cast<double>(cols.size());
}

}  // namespace

TrainResult train_predictor(const TrainingSet& dataset, const PredictorConfig& cfg,
                            const std::function<void(const EpochRecord&)>& on_epoch) {
  if (dataset.size() == 0) throw ConfigError("train_predictor: empty dataset");
  Rng rng(derive_seed(cfg.seed, 0x7472));

  // Split by source trajectory so that validation windows are unseen.
  int n_sources = 0;
  for (int s : dataset.source) n_sources = std::max(n_sources, s + 1);
  std::vector<int> order(static_cast<std::size_t>(n_sources));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const int n_val_sources =
      n_sources > 1 ? std::max(1, static_cast<int>(std::lround(cfg.validation_fraction * n_sources)))
                    : 0;
  std::vector<char> is_val(static_cast<std::size_t>(n_sources), 0);
  for (int i = 0; i < n_val_sources; ++i) is_val[order[i]] = 1;
  std::vector<long> train_cols, val_cols;
  for (long c = 0; c < dataset.size(); ++c)
    (is_val[dataset.source[c]] ? val_cols : train_cols).push_back(c);
  if (train_cols.empty()) std::swap(train_cols, val_cols);

  const double rms = std::sqrt(dataset.inputs.squaredNorm() /
                               std::max<double>(1.0, static_cast<double>(dataset.inputs.size())));
  const double scale = rms > 1e-9 ? rms : 1.0;

  TrainResult result{PredictorModel(cfg, dataset.window, dataset.behavior, scale), {}, 0};
  PredictorModel& model = result.model;
  auto params = model.params();
  nn::Adam adam(params, cfg.learning_rate);

  std::vector<nn::Matrix> best;
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(train_cols.begin(), train_cols.end(), rng);
    double sum_loss = 0.0;
    for (std::size_t start = 0; start < train_cols.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const auto batch = std::span<const long>(train_cols).subspan(
          start, std::min<std::size_t>(cfg.batch_size, train_cols.size() - start));
      const nn::Matrix x = gather(dataset.inputs, batch);
      const nn::Matrix y = gather(dataset.targets, batch);
      adam.zero_grad();
      const nn::Matrix pred = model.forward_relative(x);
      const nn::Matrix err = pred - y;
      const double loss = err.squaredNorm();
      if (!std::isfinite(loss))
        throw DivergenceError("predictor training diverged at epoch " + std::to_string(epoch));
      sum_loss += loss;
      model.backward(err * (2.0 / static_cast<double>(batch.size())));
      adam.step();
    }
    EpochRecord rec{epoch, sum_loss / static_cast<double>(train_cols.size()),
                    val_cols.empty() ? sum_loss / static_cast<double>(train_cols.size())
                                     : evaluate_mse(model, dataset, val_cols)};
    if (!std::isfinite(rec.validation_mse))
      throw DivergenceError("predictor validation loss is not finite");
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.validation_mse < best_val) {
      best_val = rec.validation_mse;
      result.best_epoch = epoch;
      since_best = 0;
      best.clear();
      for (const auto* p : params) best.push_back(p->value);
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best[i];
  return result;
}

Vec2 predict_next(const StepModel& model, std::span<const Vec2> window) {
  if (static_cast<int>(window.size()) != model.window())
    throw ConfigError("window length does not match the model");
  return model.predict_batch(window).front();
}

std::vector<std::vector<Vec2>> rollout_batch(const StepModel& model,
                                             std::span<const Vec2> windows, int horizon,
                                             Direction direction) {
  if (horizon < 1) throw ConfigError("rollout horizon must be at least 1");
  const std::size_t h = static_cast<std::size_t>(model.window());
  if (windows.size() % h != 0) throw ConfigError("window length does not match the model");
  const std::size_t B = windows.size() / h;

  std::vector<Vec2> current(windows.begin(), windows.end());
  if (direction == Direction::backward)
    for (std::size_t b = 0; b < B; ++b)
      std::reverse(current.begin() + static_cast<long>(b * h),
                   current.begin() + static_cast<long>((b + 1) * h));

  std::vector<std::vector<Vec2>> out(B);
  for (auto& o : out) o.reserve(static_cast<std::size_t>(horizon));
  for (int step = 0; step < horizon; ++step) {
    const auto next = model.predict_batch(current);
    for (std::size_t b = 0; b < B; ++b) {
      out[b].push_back(next[b]);
      auto first = current.begin() + static_cast<long>(b * h);
      std::rotate(first, first + 1, first + static_cast<long>(h));
      current[b * h + h - 1] = next[b];
    }
  }
  return out;
}

std::vector<Vec2> rollout(const StepModel& model, std::span<const Vec2> window, int horizon,
                          Direction direction) {
  if (static_cast<int>(window.size()) != model.window())
    throw ConfigError("window length does not match the model");
  return rollout_batch(model, window, horizon, direction).front();
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

HorizonQuantiles rmse_by_horizon(const StepModel& model, std::span<const Trajectory> tests,
                                 int horizon) {
  const std::size_t h = static_cast<std::size_t>(model.window());
  std::vector<Vec2> windows;
  std::vector<const Trajectory*> used;
  for (const auto& traj : tests) {
    if (traj.size() < h + static_cast<std::size_t>(horizon)) continue;
    windows.insert(windows.end(), traj.begin(), traj.begin() + static_cast<long>(h));
    used.push_back(&traj);
  }
  if (used.empty()) throw ConfigError("rmse_by_horizon: no test trajectory of length >= h + T");
  const auto preds = rollout_batch(model, windows, horizon, Direction::forward);

  HorizonQuantiles out;
  std::vector<double> errors(used.size());
  for (int k = 0; k < horizon; ++k) {
    double sq = 0.0;
    for (std::size_t i = 0; i < used.size(); ++i) {
      errors[i] = (preds[i][k] - (*used[i])[h + k]).norm();
      sq += errors[i] * errors[i];
    }
    out.q25.push_back(quantile(errors, 0.25));
    out.q50.push_back(quantile(errors, 0.50));
    out.q75.push_back(quantile(errors, 0.75));
    out.q90.push_back(quantile(errors, 0.90));
    out.rmse.push_back(std::sqrt(sq / static_cast<double>(used.size())));
  }
  return out;
}

double one_step_rmse(const StepModel& model, std::span<const Trajectory> trajectories) {
  const std::size_t h = static_cast<std::size_t>(model.window());
  double sq = 0.0;
  long n = 0;
  for (const auto& traj : trajectories) {
    if (traj.size() < h + 1) continue;
    std::vector<Vec2> windows;
    for (std::size_t s = 0; s + h < traj.size(); ++s)
      windows.insert(windows.end(), traj.begin() + static_cast<long>(s),
                     traj.begin() + static_cast<long>(s + h));
    const auto pred = model.predict_batch(windows);
    for (std::size_t s = 0; s < pred.size(); ++s, ++n) sq += (pred[s] - traj[s + h]).squaredNorm();
  }
  return n == 0 ? 0.0 : std::sqrt(sq / static_cast<double>(n));
}

std::vector<Trajectory> sample_trajectories(const TrajectorySamplerConfig& cfg) {
  cfg.dynamics.validate();
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(cfg.count));
  Rng rng(derive_seed(cfg.seed, 0x7361));
  for (int i = 0; i < cfg.count; ++i) {
    ObstacleSpec spec;
    spec.velocity = Vec2(uniform(rng, -cfg.v_x_max, cfg.v_x_max),
                         uniform(rng, -cfg.v_y_max, cfg.v_y_max));
    spec.behavior = cfg.behavior;
    spec.noise_seed = derive_seed(cfg.seed, 0x6e6f, static_cast<std::uint64_t>(i));
    out.push_back(simulate_trajectory(spec, cfg.dynamics, cfg.length));
  }
  return out;
}

}  // namespace doa
