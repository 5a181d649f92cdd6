#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "doa/trajectory_predictor.hpp"
#include "oracles.hpp"

using namespace doa;

namespace {

Trajectory line(Vec2 p0, Vec2 step, int n) {
  Trajectory t;
  for (int i = 0; i < n; ++i) t.push_back(p0 + step * i);
  return t;
}

PredictorConfig small_config() {
  PredictorConfig c;
  c.hidden = 16;
  c.dense = 16;
  c.learning_rate = 3e-3;
  c.batch_size = 32;
  c.max_epochs = 40;
  c.patience = 8;
  c.seed = 3;
  return c;
}

// Trained once and shared by the cases below.
const PredictorModel& linear_model() {
  static const PredictorModel model = [] {
    TrajectorySamplerConfig s;
    s.behavior = BehaviorKind::linear;
    s.count = 200;
    s.length = 40;
    s.seed = 10;
    const auto trajs = sample_trajectories(s);
    return train_predictor(make_training_set(trajs, kWindowLength, BehaviorKind::linear), small_config()).model;
  }();
  return model;
}

}  // namespace

TEST_CASE("training pairs are counted per window") {
  const std::vector<Trajectory> one{line({0, 0}, {1, 0}, 11)};
  CHECK(make_training_set(one).size() == 1);
  const std::vector<Trajectory> long_one{line({0, 0}, {1, 0}, 110)};
  CHECK(make_training_set(long_one).size() == 100);
  const std::vector<Trajectory> mixed{line({0, 0}, {1, 0}, 5), line({0, 0}, {1, 0}, 12)};
  const auto set = make_training_set(mixed);
  CHECK(set.size() == 2);
  CHECK(set.skipped == 1);
  CHECK(set.source == std::vector<int>{1, 1});
}

TEST_CASE("training pairs are translation invariant") {
  const std::vector<Trajectory> constant{Trajectory(15, Vec2(5, 5))};
  const auto set = make_training_set(constant);
  CHECK(set.inputs.isZero());
  CHECK(set.targets.isZero());

  const std::vector<Trajectory> a{line({0, 0}, {0.5, -1}, 30)};
  const std::vector<Trajectory> b{line({1000, -250}, {0.5, -1}, 30)};
  CHECK(make_training_set(a).inputs.isApprox(make_training_set(b).inputs));
  CHECK(make_training_set(a).targets.isApprox(make_training_set(b).targets));
}

TEST_CASE("constant velocity model continues lines exactly") {
  const ConstantVelocityModel cv;
  const auto w = line({3, 4}, {1, 0.5}, kWindowLength);
  CHECK(predict_next(cv, w).isApprox(Vec2(3 + 10, 4 + 5)));
  const auto fwd = rollout(cv, w, 100, Direction::forward);
  CHECK(fwd.back().isApprox(Vec2(3, 4) + Vec2(1, 0.5) * 109));
  const auto bwd = rollout(cv, w, 5, Direction::backward);
  for (int k = 0; k < 5; ++k) CHECK(bwd[k].isApprox(Vec2(3, 4) - Vec2(1, 0.5) * (k + 1)));
}

TEST_CASE("rollout with horizon 1 equals a single prediction") {
  const ConstantVelocityModel cv;
  const auto w = line({0, 0}, {0.3, 0.1}, kWindowLength);
  const auto r = rollout(cv, w, 1, Direction::forward);
  REQUIRE(r.size() == 1);
  CHECK(r[0] == predict_next(cv, w));
  CHECK_THROWS(rollout(cv, w, 0, Direction::forward));
  CHECK_THROWS(predict_next(cv, std::vector<Vec2>(3)));
}

TEST_CASE("backward rollout equals a forward rollout on the reversed window") {
  const auto& model = linear_model();
  Rng rng(4);
  Trajectory w;
  for (int k = 0; k < kWindowLength; ++k) w.push_back(Vec2(uniform(rng, -5, 5), uniform(rng, -5, 5)));
  Trajectory rev(w.rbegin(), w.rend());
  const auto a = rollout(model, w, 7, Direction::backward);
  const auto b = rollout(model, rev, 7, Direction::forward);
  for (int k = 0; k < 7; ++k) CHECK(a[k] == b[k]);
}

TEST_CASE("a constant target is learnable") {
  std::vector<Trajectory> trajs;
  for (int i = 0; i < 20; ++i) trajs.emplace_back(30, Vec2(i, -i));
  auto cfg = small_config();
  cfg.max_epochs = 60;
  const auto result = train_predictor(make_training_set(trajs), cfg);
  CHECK(result.log.at(static_cast<std::size_t>(result.best_epoch - 1)).train_mse < 1e-6);
  const auto w = Trajectory(kWindowLength, Vec2(7, 7));
  CHECK((predict_next(result.model, w) - Vec2(7, 7)).norm() < 1e-2);
}

TEST_CASE("noiseless linear motion is learned") {
  const auto& model = linear_model();
  TrajectorySamplerConfig s;
  s.behavior = BehaviorKind::linear;
  s.count = 30;
  s.length = 40;
  s.seed = 77;
  const auto held_out = sample_trajectories(s);
  const double rmse = one_step_rmse(model, held_out);
  CHECK(rmse * rmse < 0.1);
  const double exact = one_step_rmse(ConstantVelocityModel{}, held_out);
  CHECK(exact < 1e-9);

  // 1 m per step in x
  const auto w = line({20, -3}, {1, 0}, kWindowLength);
  CHECK((predict_next(model, w) - (w.back() + Vec2(1, 0))).norm() < 0.1);
  // totality on an arbitrary window
  Trajectory odd{{1e3, -2e3}, {0, 0}, {5, 5}, {-40, 2}, {7, 7}, {0, 1}, {3, 3}, {2, 9}, {-1, -1}, {0, 0}};
  CHECK(predict_next(model, odd).allFinite());
  CHECK(predict_next(model, w) == predict_next(model, w));
}

TEST_CASE("linear rollout endpoint stays close to exact extrapolation") {
  const auto& model = linear_model();
  const Vec2 step(1.5, -0.5);
  const auto w = line({0, 0}, step, kWindowLength);
  const auto r = rollout(model, w, 100, Direction::forward);
  const Vec2 exact = w.back() + step * 100;
  CHECK((r.back() - exact).norm() <= 0.05 * (exact - w.back()).norm());
}

TEST_CASE("horizon error statistics") {
  const ConstantVelocityModel cv;
  std::vector<Trajectory> clean;
  for (int i = 0; i < 5; ++i) clean.push_back(line({i * 1.0, 0}, {0.2, 0.1 * i}, 120));
  const auto q = rmse_by_horizon(cv, clean, 100);
  REQUIRE(q.q50.size() == 100);
  for (std::size_t k = 0; k < 100; ++k) {
    CHECK(q.rmse[k] < 1e-9);
    CHECK(q.q90[k] < 1e-9);
  }

  DynamicsParams p;
  TrajectorySamplerConfig s;
  s.behavior = BehaviorKind::stochastic;
  s.count = 40;
  s.length = 120;
  const auto noisy = sample_trajectories(s);
  const auto n = rmse_by_horizon(cv, noisy, 100);
  for (std::size_t k = 0; k < 100; ++k) {
    CHECK(n.q25[k] <= n.q50[k]);
    CHECK(n.q50[k] <= n.q75[k]);
    CHECK(n.q75[k] <= n.q90[k]);
  }
  CHECK_THROWS(rmse_by_horizon(cv, clean, 200));
}

TEST_CASE("quantile interpolation") {
  CHECK(quantile({1, 2, 3, 4}, 0.5) == doctest::Approx(2.5));
  CHECK(quantile({4, 1, 3, 2}, 0.25) == doctest::Approx(1.75));
  CHECK(quantile({5}, 0.9) == 5.0);
  CHECK(std::isnan(quantile({}, 0.5)));
}

TEST_CASE("predictor gradients match central finite differences") {
  PredictorConfig cfg;
  cfg.hidden = 3;
  cfg.dense = 4;
  PredictorModel model(cfg, 4, BehaviorKind::stochastic, 2.0);
  Rng rng(8);
  nn::Matrix x(8, 3), y(2, 3);
  for (long i = 0; i < x.size(); ++i) x.data()[i] = uniform(rng, -3, 3);
  for (long i = 0; i < y.size(); ++i) y.data()[i] = uniform(rng, -3, 3);
  auto params = model.params();
  nn::zero_grad(params);
  const nn::Matrix err = model.forward_relative(x) - y;
  model.backward(2.0 * err);
  std::vector<nn::Matrix> analytic;
  for (auto* p : params) analytic.push_back(p->grad);
  const auto numeric = oracle::finite_difference(
      params, [&] { return (model.infer_relative(x) - y).squaredNorm(); });
  CHECK(oracle::max_relative_error(analytic, numeric) <= 1e-4);
}

TEST_CASE("checkpoint round trip keeps predictions and metadata") {
  const auto& model = linear_model();
  const auto path = std::filesystem::temp_directory_path() / "doa_predictor_test.json";
  model.save(path);
  const auto back = PredictorModel::load(path);
  std::filesystem::remove(path);
  CHECK(back.behavior() == BehaviorKind::linear);
  CHECK(back.position_scale() == model.position_scale());
  const auto w = line({1, 2}, {0.4, 0.2}, kWindowLength);
  CHECK(predict_next(back, w) == predict_next(model, w));
}

TEST_CASE("sampled trajectories are reproducible") {
  TrajectorySamplerConfig s;
  s.count = 3;
  s.length = 50;
  const auto a = sample_trajectories(s);
  const auto b = sample_trajectories(s);
  for (int i = 0; i < 3; ++i) CHECK(a[i] == b[i]);
  CHECK(a[0].front() == Vec2(0, 0));
}
