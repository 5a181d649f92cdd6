#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "doa/obstacle_dynamics.hpp"

using namespace doa;

namespace {

ObstacleSpec spec_with(Vec2 p0, Vec2 v, BehaviorKind b = BehaviorKind::linear, std::uint64_t seed = 7) {
  ObstacleSpec s;
  s.initial_position = p0;
  s.velocity = v;
  s.behavior = b;
  s.noise_seed = seed;
  return s;
}

}  // namespace

TEST_CASE("linear position uses physical time") {
  CHECK(linear_position(spec_with({0, 0}, {2, 1}), 2, 5.0).isApprox(Vec2(20, 10)));
  CHECK(linear_position(spec_with({5, -5}, {0, 0}), 100, 5.0) == Vec2(5, -5));
  CHECK(linear_position(spec_with({0, 0}, {1, 0}), 0, 5.0) == Vec2(0, 0));
}

TEST_CASE("stochastic offset step follows the smoothed AR(1) recurrence") {
  DynamicsParams p;
  const auto r = stochastic_offset_step(StochasticState{}, p, 2.5, Vec2(10, 0));
  CHECK(r.state.ar_value.isApprox(Vec2(10, 0)));
  CHECK(r.state.smoothed.isApprox(Vec2(2, 0)));
  CHECK(r.offset.isApprox(Vec2(1, 0)));

  const auto still = stochastic_offset_step(StochasticState{}, p, 0.0, Vec2(10, 0));
  CHECK(still.offset == Vec2(0, 0));

  // second step evaluated by hand: A2 = 0.9*10 + 0 = 9, S2 = 0.2*9 + 0.8*2 = 3.4
  const auto r2 = stochastic_offset_step(r.state, p, 2.5, Vec2(0, 0));
  CHECK(r2.state.ar_value.x() == doctest::Approx(9.0));
  CHECK(r2.state.smoothed.x() == doctest::Approx(3.4));
  CHECK(r2.offset.x() == doctest::Approx(1.7));
}

TEST_CASE("zero noise keeps the stochastic offset at zero") {
  DynamicsParams p;
  p.sigma2_stoch = 0.0;
  Rng rng(1);
  StochasticState s;
  for (int t = 0; t < 100; ++t) {
    auto r = stochastic_offset_step(s, p, 3.0, rng);
    CHECK(r.offset == Vec2(0, 0));
    s = r.state;
  }
}

TEST_CASE("periodic offset") {
  DynamicsParams p;
  CHECK(periodic_offset({2, 0}, 0, p, Vec2::Zero()).norm() == doctest::Approx(0.0));
  const Vec2 quarter = periodic_offset({2, 0}, 5, p, Vec2::Zero());
  CHECK(quarter.x() == doctest::Approx(0.0));
  CHECK(quarter.y() == doctest::Approx(-30.0));
  CHECK(periodic_offset({2, 0}, 10, p, Vec2::Zero()).norm() == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("periodic offset without noise is periodic and orthogonal to velocity") {
  DynamicsParams p;
  const Vec2 v(0.3, -0.4);
  for (long t = 0; t < 60; ++t) {
    const Vec2 a = periodic_offset(v, t, p, Vec2::Zero());
    const Vec2 b = periodic_offset(v, t + static_cast<long>(p.T_sin), p, Vec2::Zero());
    CHECK((a - b).norm() < 1e-9);
    CHECK(std::abs(a.dot(v)) < 1e-12);
  }
}

TEST_CASE("obstacle position sums linear and non-linear parts") {
  DynamicsParams p;
  p.sigma2_sin = 0.0;
  const auto s = spec_with({0, 0}, {2, 0}, BehaviorKind::periodic);
  const Vec2 pos = obstacle_position(s, 5, p.dt, periodic_offset(s.velocity, 5, p, Vec2::Zero()));
  CHECK(pos.isApprox(Vec2(50, -30)));

  const auto traj = simulate_trajectory(s, p, 6);
  CHECK(traj[5].isApprox(Vec2(50, -30)));
}

TEST_CASE("linear-only and noiseless stochastic trajectories coincide with the linear part") {
  DynamicsParams p;
  p.sigma2_stoch = 0.0;
  for (auto kind : {BehaviorKind::linear, BehaviorKind::stochastic}) {
    const auto s = spec_with({3, -4}, {0.4, 0.1}, kind);
    const auto traj = simulate_trajectory(s, p, 50);
    for (long t = 0; t < 50; ++t) CHECK(traj[t] == linear_position(s, t, p.dt));
  }
}

TEST_CASE("trajectories are reproducible from the noise seed") {
  DynamicsParams p;
  for (auto kind : {BehaviorKind::stochastic, BehaviorKind::periodic}) {
    const auto s = spec_with({0, 0}, {0.5, 0.2}, kind, 42);
    const auto a = simulate_trajectory(s, p, 300);
    const auto b = simulate_trajectory(s, p, 300);
    for (std::size_t t = 0; t < a.size(); ++t) CHECK(a[t] == b[t]);
    auto other = s;
    other.noise_seed = 43;
    CHECK(simulate_trajectory(other, p, 300).back() != a.back());
  }
}

TEST_CASE("smoothed AR value is bounded by the largest AR magnitude so far") {
  DynamicsParams p;
  Rng rng(5);
  StochasticState s;
  double max_norm = 0.0;
  for (int t = 0; t < 2000; ++t) {
    s = stochastic_offset_step(s, p, 1.0, rng).state;
    max_norm = std::max(max_norm, s.ar_value.norm());
    CHECK(s.smoothed.norm() <= max_norm + 1e-9);
  }
}

TEST_CASE("parameter validation") {
  DynamicsParams p;
  CHECK_NOTHROW(p.validate());
  p.phi_stoch = 1.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = DynamicsParams{};
  p.beta_stoch = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = DynamicsParams{};
  p.sigma2_sin = -1.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("trajectory dump round trip") {
  DynamicsParams p;
  const auto traj = simulate_trajectory(spec_with({1, 2}, {0.1, 0.3}, BehaviorKind::stochastic), p, 20);
  std::stringstream ss;
  write_trajectory(ss, traj);
  CHECK(ss.str().starts_with("t_step, x, y\n0, "));
  const auto back = read_trajectory(ss);
  REQUIRE(back.size() == traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) CHECK(back[i] == traj[i]);
}
