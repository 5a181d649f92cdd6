#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "doa/common.hpp"

namespace doa {

/// Parameters of the non-linear obstacle motion. Defaults follow the
/// reference environment.
struct DynamicsParams {
  double phi_stoch = 0.9;      ///< AR(1) coefficient of the stochastic offset
  double sigma2_stoch = 225.0; ///< innovation variance per coordinate [m^2]
  double beta_stoch = 0.2;     ///< exponential smoothing factor
  double v_max = 5.0;          ///< speed used to scale the stochastic offset [m/s]
  double A_sin = 15.0;         ///< periodic amplitude [m]
  double T_sin = 20.0;         ///< periodic period [steps]
  double sigma2_sin = 16.0;    ///< periodic noise variance per coordinate [m^2]
  double dt = 5.0;             ///< simulation step [s]

  void validate() const;
};

struct ObstacleSpec {
  Vec2 initial_position = Vec2::Zero();
  Vec2 velocity = Vec2::Zero();
  BehaviorKind behavior = BehaviorKind::linear;
  std::uint64_t noise_seed = 0;
  PassingRule passing_rule = PassingRule::right;
};

/// State of the smoothed AR(1) offset process. Both members start at zero.
struct StochasticState {
  Vec2 ar_value = Vec2::Zero();
  Vec2 smoothed = Vec2::Zero();
};

struct StochasticStep {
  StochasticState state;
  Vec2 offset;
};

/// Linear part of the trajectory at a step index; time is t_step * dt seconds.
Vec2 linear_position(const ObstacleSpec& spec, long t_step, double dt);

/// Advances the AR(1) recurrence with the given innovation, smooths it and
/// returns the new state plus the speed-scaled offset.
StochasticStep stochastic_offset_step(const StochasticState& state, const DynamicsParams& params,
                                      double speed, const Vec2& innovation);
StochasticStep stochastic_offset_step(const StochasticState& state, const DynamicsParams& params,
                                      double speed, Rng& rng);

/// Perpendicular sinusoid plus additive noise. The direction vector
/// (vy, -vx) is not normalized, so the amplitude grows with speed.
Vec2 periodic_offset(const Vec2& velocity, long t_step, const DynamicsParams& params,
                     const Vec2& noise);
Vec2 periodic_offset(const Vec2& velocity, long t_step, const DynamicsParams& params, Rng& rng);

inline Vec2 obstacle_position(const ObstacleSpec& spec, long t_step, double dt,
                              const Vec2& nonlinear_offset) {
  return linear_position(spec, t_step, dt) + nonlinear_offset;
}

/// Step-by-step generator for a single obstacle. Owns its noise stream, so
/// independent instances can be advanced from different threads.
class ObstacleTrajectory {
 public:
  ObstacleTrajectory(const ObstacleSpec& spec, const DynamicsParams& params);

  const ObstacleSpec& spec() const { return spec_; }
  long step() const { return step_; }
  Vec2 position() const { return linear_position() + offset_; }
  Vec2 linear_position() const { return doa::linear_position(spec_, step_, params_.dt); }
  const Vec2& offset() const { return offset_; }

  void advance();

 private:
  Vec2 draw_offset();

  ObstacleSpec spec_;
  DynamicsParams params_;
  Rng rng_;
  long step_ = 0;
  StochasticState stoch_;
  Vec2 offset_ = Vec2::Zero();
};

/// Positions for steps 0..steps-1.
std::vector<Vec2> simulate_trajectory(const ObstacleSpec& spec, const DynamicsParams& params,
                                      long steps);

/// Writes "t_step, x, y" rows.
void write_trajectory(std::ostream& os, std::span<const Vec2> positions);
std::vector<Vec2> read_trajectory(std::istream& is);

}  // namespace doa
