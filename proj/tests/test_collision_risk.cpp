#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "doa/collision_risk.hpp"
#include "oracles.hpp"

using namespace doa;

namespace {

std::vector<Vec2> linear_window(Vec2 p_now, Vec2 v, double dt = 5.0, int h = kWindowLength) {
  std::vector<Vec2> w;
  for (int j = -(h - 1); j <= 0; ++j) w.push_back(p_now + v * (j * dt));
  return w;
}

DistanceCurve make_curve(std::vector<double> v, int first = 0) {
  DistanceCurve c;
  c.values = std::move(v);
  c.first_step = first;
  return c;
}

}  // namespace

TEST_CASE("agent linear trajectory") {
  const auto still = agent_linear_trajectory({{3, 4}, {0, 0}, 0}, -5, 5, 5.0);
  for (const auto& p : still) CHECK(p == Vec2(3, 4));
  const auto moving = agent_linear_trajectory({{0, 0}, {1, 0}, 0}, -10, 10, 5.0);
  CHECK(moving.front() == Vec2(-50, 0));
  CHECK(moving.back() == Vec2(50, 0));
  CHECK(moving.size() == 21);
}

TEST_CASE("distance curve") {
  const std::vector<Vec2> a{{0, 0}, {1, 1}, {2, 2}};
  CHECK(distance_curve(a, a, 0, 5.0).values == std::vector<double>{0, 0, 0});
  std::vector<Vec2> shifted;
  for (const auto& p : a) shifted.push_back(p + Vec2(3, 4));
  for (double v : distance_curve(shifted, a, 0, 5.0).values) CHECK(v == doctest::Approx(5.0));

  // head-on closing at 2 m/s from 100 m
  const auto obs = agent_linear_trajectory({{100, 0}, {-1, 0}, 0}, 0, 5, 5.0);
  const auto ag = agent_linear_trajectory({{0, 0}, {1, 0}, 0}, 0, 5, 5.0);
  const auto c = distance_curve(obs, ag, 0, 5.0);
  for (int j = 0; j <= 5; ++j) CHECK(c.at_step(j) == doctest::Approx(100.0 - 10.0 * j));

  CHECK_THROWS_AS(distance_curve(a, std::vector<Vec2>{{0, 0}}, 0, 5.0), ConfigError);
}

TEST_CASE("moving average smoothing") {
  const auto flat = smooth_distance(make_curve(std::vector<double>(30, 7.0)), 10);
  for (double v : flat.values) CHECK(v == doctest::Approx(7.0));

  const auto raw = make_curve({5, 1, 4, 1, 5, 9, 2, 6});
  CHECK(smooth_distance(raw, 0).values == raw.values);

  // shrinking window at the ends: first element averages indices 0..2 for n = 2
  const auto s = smooth_distance(raw, 2);
  CHECK(s.values[0] == doctest::Approx((5 + 1 + 4) / 3.0));
  CHECK(s.values[3] == doctest::Approx((1 + 4 + 1 + 5 + 9) / 5.0));
  CHECK(s.values[7] == doctest::Approx((9 + 2 + 6) / 3.0));

  std::vector<double> v;
  for (int j = -100; j <= 100; ++j) v.push_back(std::abs(j * 3.0 - 20.0));
  const auto vc = make_curve(v, -100);
  const auto sv = smooth_distance(vc, 10);
  const double raw_min = *std::min_element(vc.values.begin(), vc.values.end());
  const double smooth_min = *std::min_element(sv.values.begin(), sv.values.end());
  CHECK(smooth_min >= raw_min);
  CHECK_THROWS(smooth_distance(vc, -1));
}

TEST_CASE("cpa extraction") {
  auto c = make_curve(std::vector<double>(201, 50.0), -100);
  const auto flat = estimate_cpa(c);
  CHECK(flat.d_cpa == 50.0);
  CHECK(flat.t_cpa == -500.0);

  c.values[150] = 10.0;
  c.values[160] = 10.0;
  const auto two = estimate_cpa(c);
  CHECK(two.d_cpa == 10.0);
  CHECK(two.t_cpa == 50.0 * 5.0);
}

TEST_CASE("cpa of exact linear encounters matches the closed form") {
  const ConstantVelocityModel exact;
  CRConfig raw_cfg;
  raw_cfg.smoothing = 0;

  SUBCASE("head-on") {
    const AgentState agent{{0, 0}, {1, 0}, 0};
    const auto w = linear_window({100, 0}, {-1, 0});
    const auto m = collision_risk_for_obstacle(exact, w, agent, raw_cfg);
    const auto o = oracle::closed_form_cpa(Vec2(100, 0), Vec2(-2, 0));
    CHECK(o.t == doctest::Approx(50.0));
    CHECK(m.d_cpa_hat == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(m.t_cpa_hat == doctest::Approx(o.t));
    // symmetric smoothing keeps the minimum in place
    CHECK(collision_risk_for_obstacle(exact, w, agent, CRConfig{}).t_cpa_hat == doctest::Approx(50.0));
  }
  SUBCASE("crossing") {
    const AgentState agent{{0, 0}, {1, 0}, 0};
    const auto w = linear_window({50, -30}, {0, 1});
    const auto m = collision_risk_for_obstacle(exact, w, agent, raw_cfg);
    const auto o = oracle::closed_form_cpa(Vec2(50, -30), Vec2(-1, 1));
    CHECK(o.t == doctest::Approx(40.0));
    CHECK(o.d == doctest::Approx(14.1421356));
    CHECK(m.d_cpa_hat == doctest::Approx(o.d));
    CHECK(m.t_cpa_hat == doctest::Approx(o.t));
  }
  SUBCASE("stationary pair") {
    const AgentState agent{{0, 0}, {0, 0}, 0};
    const auto w = linear_window({80, 0}, {0, 0});
    CHECK(collision_risk_for_obstacle(exact, w, agent, CRConfig{}).d_cpa_hat == doctest::Approx(80.0));
  }
}

TEST_CASE("raw pipeline recovers closed-form cpa for random linear scenarios") {
  const ConstantVelocityModel exact;
  CRConfig cfg;
  cfg.smoothing = 0;
  Rng rng(99);
  int checked = 0;
  for (int k = 0; k < 200; ++k) {
    const AgentState agent{{0, uniform(rng, -50, 50)}, {uniform(rng, 1, 5), uniform(rng, -0.5, 0.5)}, 0};
    const Vec2 p(uniform(rng, -1500, 1500), uniform(rng, -300, 300));
    const Vec2 v(uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5));
    const auto o = oracle::closed_form_cpa(p - agent.position, v - agent.velocity);
    if (std::abs(o.t) > 450.0) continue;
    const auto m = collision_risk_for_obstacle(exact, linear_window(p, v), agent, cfg);
    // sampling at dt: the grid minimum is within half a step of t*
    CHECK(std::abs(m.t_cpa_hat - o.t) <= 2.5 + 1e-9);
    CHECK(m.d_cpa_hat >= o.d - 1e-9);
    CHECK(m.d_cpa_hat <= std::hypot(o.d, 2.5 * (v - agent.velocity).norm()) + 1e-9);
    ++checked;
  }
  CHECK(checked > 50);
}

TEST_CASE("predicted path assembly") {
  const ConstantVelocityModel exact;
  const CRConfig cfg;
  const Vec2 v(0.3, -0.2);
  const auto w = linear_window({10, 20}, v);
  const auto path = predicted_obstacle_path(exact, w, cfg);
  REQUIRE(path.size() == 201);
  for (int j = -100; j <= 100; ++j) {
    const Vec2 expected = Vec2(10, 20) + v * (j * 5.0);
    CHECK((path[j + 100] - expected).norm() < 1e-9);
  }
  CHECK_THROWS(predicted_obstacle_path(exact, std::vector<Vec2>(3), cfg));
}

TEST_CASE("diverging obstacle has its approach in the past") {
  const ConstantVelocityModel exact;
  const AgentState agent{{0, 0}, {2, 0}, 0};
  const auto w = linear_window({-400, 50}, {0.2, 0});
  const auto m = collision_risk_for_obstacle(exact, w, agent, CRConfig{});
  CHECK(m.t_cpa_hat < 0.0);
}

TEST_CASE("batched and single evaluation agree") {
  const ConstantVelocityModel exact;
  const AgentState agent{{0, 5}, {2, 0.1}, 0};
  std::vector<Vec2> all;
  std::vector<CRMetrics> single;
  Rng rng(3);
  for (int b = 0; b < 4; ++b) {
    const auto w = linear_window({uniform(rng, -500, 500), uniform(rng, -200, 200)},
                                 {uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5)});
    all.insert(all.end(), w.begin(), w.end());
    single.push_back(collision_risk_for_obstacle(exact, w, agent, CRConfig{}));
  }
  const auto batch = collision_risk_batch(exact, all, agent, CRConfig{});
  REQUIRE(batch.size() == 4);
  for (int b = 0; b < 4; ++b) {
    CHECK(batch[b].d_cpa_hat == single[b].d_cpa_hat);
    CHECK(batch[b].t_cpa_hat == single[b].t_cpa_hat);
  }
}

TEST_CASE("distance dump") {
  const ConstantVelocityModel exact;
  const auto d = collision_risk_detail(exact, linear_window({100, 0}, {-1, 0}), {{0, 0}, {1, 0}, 0}, CRConfig{});
  std::ostringstream os;
  write_distance_dump(os, 3, d);
  const std::string s = os.str();
  CHECK(s.starts_with("obstacle_id,j,raw_distance,smoothed_distance\n3,-100,"));
  CHECK(std::count(s.begin(), s.end(), '\n') == 202);
}
