#include "doa/obstacle_dynamics.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

namespace doa {

std::string_view to_string(BehaviorKind kind) {
  switch (kind) {
    case BehaviorKind::linear: return "linear";
    case BehaviorKind::stochastic: return "stochastic";
    case BehaviorKind::periodic: return "periodic";
  }
  return "unknown";
}

BehaviorKind behavior_from_string(std::string_view name) {
  if (name == "linear") return BehaviorKind::linear;
  if (name == "stochastic") return BehaviorKind::stochastic;
  if (name == "periodic") return BehaviorKind::periodic;
  throw ConfigError("unknown behavior kind: " + std::string(name));
}

std::string_view to_string(PassingRule rule) {
  return rule == PassingRule::right ? "right" : "left";
}

void DynamicsParams::validate() const {
  if (!(phi_stoch >= 0.0 && phi_stoch < 1.0)) throw ConfigError("phi_stoch must lie in [0, 1)");
  if (!(beta_stoch > 0.0 && beta_stoch <= 1.0)) throw ConfigError("beta_stoch must lie in (0, 1]");
  if (sigma2_stoch < 0.0 || sigma2_sin < 0.0) throw ConfigError("variances must be non-negative");
  if (!(T_sin >= 1.0)) throw ConfigError("T_sin must be at least one step");
  if (!(v_max > 0.0)) throw ConfigError("v_max must be positive");
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
}

Vec2 linear_position(const ObstacleSpec& spec, long t_step, double dt) {
  return spec.initial_position + spec.velocity * (static_cast<double>(t_step) * dt);
}

StochasticStep stochastic_offset_step(const StochasticState& state, const DynamicsParams& params,
                                      double speed, const Vec2& innovation) {
  StochasticStep out;
  out.state.ar_value = params.phi_stoch * state.ar_value + innovation;
  out.state.smoothed =
      params.beta_stoch * out.state.ar_value + (1.0 - params.beta_stoch) * state.smoothed;
  out.offset = (speed / params.v_max) * out.state.smoothed;
  return out;
}

StochasticStep stochastic_offset_step(const StochasticState& state, const DynamicsParams& params,
                                      double speed, Rng& rng) {
  const double sd = std::sqrt(params.sigma2_stoch);
  const double ux = normal(rng, 0.0, sd);
  const double uy = normal(rng, 0.0, sd);
  return stochastic_offset_step(state, params, speed, Vec2(ux, uy));
}

Vec2 periodic_offset(const Vec2& velocity, long t_step, const DynamicsParams& params,
                     const Vec2& noise) {
  const double phase = 2.0 * std::numbers::pi * static_cast<double>(t_step) / params.T_sin;
  return Vec2(velocity.y(), -velocity.x()) * (params.A_sin * std::sin(phase)) + noise;
}

Vec2 periodic_offset(const Vec2& velocity, long t_step, const DynamicsParams& params, Rng& rng) {
  const double sd = std::sqrt(params.sigma2_sin);
  const double ux = normal(rng, 0.0, sd);
  const double uy = normal(rng, 0.0, sd);
  return periodic_offset(velocity, t_step, params, Vec2(ux, uy));
}

ObstacleTrajectory::ObstacleTrajectory(const ObstacleSpec& spec, const DynamicsParams& params)
    : spec_(spec), params_(params), rng_(spec.noise_seed) {
  offset_ = draw_offset();
}

void ObstacleTrajectory::advance() {
  ++step_;
  offset_ = draw_offset();
}

Vec2 ObstacleTrajectory::draw_offset() {
  switch (spec_.behavior) {
    case BehaviorKind::linear:
      return Vec2::Zero();
    case BehaviorKind::stochastic: {
      if (step_ == 0) return Vec2::Zero();  // A_0 = A_0,smooth = 0
      auto next = stochastic_offset_step(stoch_, params_, spec_.velocity.norm(), rng_);
      stoch_ = next.state;
      return next.offset;
    }
    case BehaviorKind::periodic:
      return periodic_offset(spec_.velocity, step_, params_, rng_);
  }
  return Vec2::Zero();
}

std::vector<Vec2> simulate_trajectory(const ObstacleSpec& spec, const DynamicsParams& params,
                                      long steps) {
  std::vector<Vec2> out;
  if (steps <= 0) return out;
  out.reserve(static_cast<std::size_t>(steps));
  ObstacleTrajectory traj(spec, params);
  out.push_back(traj.position());
  for (long t = 1; t < steps; ++t) {
    traj.advance();
    out.push_back(traj.position());
  }
  return out;
}

void write_trajectory(std::ostream& os, std::span<const Vec2> positions) {
  os << "t_step, x, y\n";
  os << std::setprecision(17);
  for (std::size_t t = 0; t < positions.size(); ++t)
    os << t << ", " << positions[t].x() << ", " << positions[t].y() << '\n';
}

std::vector<Vec2> read_trajectory(std::istream& is) {
  std::vector<Vec2> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line.starts_with("t_step")) continue;
    std::istringstream row(line);
    long t = 0;
    double x = 0.0, y = 0.0;
    char c1 = 0, c2 = 0;
    if (!(row >> t >> c1 >> x >> c2 >> y) || c1 != ',' || c2 != ',')
      throw ConfigError("malformed trajectory row: " + line);
    out.emplace_back(x, y);
  }
  return out;
}

}  // namespace doa
