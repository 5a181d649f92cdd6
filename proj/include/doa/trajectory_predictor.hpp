#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "doa/common.hpp"
#include "doa/nn.hpp"
#include "doa/obstacle_dynamics.hpp"

namespace doa {

inline constexpr int kWindowLength = 10;

/// Positions of one obstacle at consecutive steps, oldest first.
using Trajectory = std::vector<Vec2>;

/// Windowed one-step-ahead pairs. Inputs and targets are expressed relative to
/// the last position of their window; column i of `inputs` holds the h
/// relative positions (x0, y0, x1, y1, ...), column i of `targets` the next one.
struct TrainingSet {
  int window = kWindowLength;
  BehaviorKind behavior = BehaviorKind::linear;
  nn::Matrix inputs;   // 2h x N
  nn::Matrix targets;  // 2 x N
  std::vector<int> source;  // trajectory index of each pair
  int skipped = 0;          // trajectories shorter than h + 1

  long size() const { return targets.cols(); }
};

TrainingSet make_training_set(std::span<const Trajectory> trajectories, int h = kWindowLength,
                              BehaviorKind behavior = BehaviorKind::linear);

/// Anything that maps windows of absolute positions to the next position.
class StepModel {
 public:
  virtual ~StepModel() = default;
  virtual int window() const = 0;
  /// `windows` holds B windows back to back (B * window() positions).
  virtual std::vector<Vec2> predict_batch(std::span<const Vec2> windows) const = 0;
};

/// Exact continuation for noiseless linear motion: repeats the last displacement.
class ConstantVelocityModel final : public StepModel {
 public:
  explicit ConstantVelocityModel(int window = kWindowLength) : window_(window) {}
  int window() const override { return window_; }
  std::vector<Vec2> predict_batch(std::span<const Vec2> windows) const override;

 private:
  int window_;
};

struct PredictorConfig {
  int hidden = 64;
  int dense = 64;
  double learning_rate = 1e-3;
  int batch_size = 64;
  int max_epochs = 60;
  int patience = 10;
  double validation_fraction = 0.1;
  std::uint64_t seed = 1;
};

struct EpochRecord {
  int epoch;
  double train_mse;       // m^2, summed over both coordinates
  double validation_mse;  // m^2
};

/// LSTM(64) -> Dense(64, ReLU) -> Dense(2) one-step model on window-relative,
/// scaled coordinates.
class PredictorModel final : public StepModel {
 public:
  PredictorModel() = default;
  PredictorModel(const PredictorConfig& cfg, int window, BehaviorKind behavior, double scale);

  int window() const override { return window_; }
  BehaviorKind behavior() const { return behavior_; }
  double position_scale() const { return scale_; }

  std::vector<Vec2> predict_batch(std::span<const Vec2> windows) const override;

  /// Predictions in scaled relative coordinates for a TrainingSet slice.
  nn::Matrix infer_relative(const nn::Matrix& inputs) const;
  nn::Matrix forward_relative(const nn::Matrix& inputs);
  void backward(const nn::Matrix& doutput);

  std::vector<nn::Param*> params();

  void save(const std::filesystem::path& path) const;
  static PredictorModel load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  static PredictorModel from_json(const nlohmann::json& j);

 private:
  nn::Sequence to_sequence(const nn::Matrix& inputs) const;

  int window_ = kWindowLength;
  BehaviorKind behavior_ = BehaviorKind::linear;
  double scale_ = 1.0;
  int hidden_ = 64, dense_ = 64;
  nn::Lstm lstm_;
  nn::Dense hidden_layer_;
  nn::Dense output_;
};

struct TrainResult {
  PredictorModel model;
  std::vector<EpochRecord> log;
  int best_epoch = 0;
};

/// Adam on mean squared error with a trajectory-wise train/validation split
/// and early stopping; returns the best-validation parameters.
TrainResult train_predictor(const TrainingSet& dataset, const PredictorConfig& cfg,
                            const std::function<void(const EpochRecord&)>& on_epoch = {});

Vec2 predict_next(const StepModel& model, std::span<const Vec2> window);

enum class Direction { forward, backward };

/// Iterated one-step forecasts. Backward reverses the window, rolls forward and
/// returns positions nearest-in-time first (p_{t-h}, p_{t-h-1}, ...).
std::vector<Vec2> rollout(const StepModel& model, std::span<const Vec2> window, int horizon,
                          Direction direction);
/// Same for B windows stored back to back; result[b] is the rollout of window b.
std::vector<std::vector<Vec2>> rollout_batch(const StepModel& model,
                                             std::span<const Vec2> windows, int horizon,
                                             Direction direction);

struct HorizonQuantiles {
  std::vector<double> q25, q50, q75, q90;
  std::vector<double> rmse;  // pooled over trajectories
};

/// Per forecast step k = 1..T: Euclidean error of every test trajectory's
/// rollout from its first window, summarized by quantiles over trajectories.
HorizonQuantiles rmse_by_horizon(const StepModel& model, std::span<const Trajectory> tests,
                                 int horizon);

/// Pooled one-step RMSE (Euclidean) over every window of the given trajectories.
double one_step_rmse(const StepModel& model, std::span<const Trajectory> trajectories);

/// Linear quantile interpolation (type 7) of unsorted data.
double quantile(std::vector<double> values, double p);

struct TrajectorySamplerConfig {
  BehaviorKind behavior = BehaviorKind::stochastic;
  DynamicsParams dynamics;
  double v_x_max = 0.5;
  double v_y_max = 0.5;
  int count = 1000;
  int length = 200;
  std::uint64_t seed = 1;
};

/// Trajectories with velocities drawn like the environment's obstacles.
std::vector<Trajectory> sample_trajectories(const TrajectorySamplerConfig& cfg);

}  // namespace doa
