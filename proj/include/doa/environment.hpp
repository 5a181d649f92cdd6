#pragma once

#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include <json.hpp>

#include "doa/collision_risk.hpp"
#include "doa/common.hpp"
#include "doa/obstacle_dynamics.hpp"
#include "doa/trajectory_predictor.hpp"

namespace doa {

enum class ObservationMode { sl, baseline };

std::string_view to_string(ObservationMode mode);
ObservationMode mode_from_string(std::string_view name);

struct EnvConfig {
  int n_obstacles = 10;
  double a_y_max = 0.01;    // m/s^2
  double v_max = 5.0;       // m/s
  double dt = 5.0;          // s
  int n_steps = 500;
  double p_scale = 3000.0;  // m
  double d_cpa_scale = 400.0;
  double t_cpa_scale = 300.0;
  double dttc_max = 300.0;  // s
  double phi_traj = 0.99;
  double sigma2_traj = 800.0;
  double beta_traj = 0.03;
  double mu_dy = 100.0;
  double sigma2_dy = 2500.0;
  double dy_min = 40.0;
  double v_x_max = 0.5;
  double v_y_max = 0.5;
  double agent_speed_min = 1.0;
  double min_closing_speed = 0.1;  // resampling threshold for |vx_agent - vx_obstacle|
  int cr_refresh_interval = 10;
  BehaviorKind behavior = BehaviorKind::stochastic;
  ObservationMode mode = ObservationMode::sl;
  DynamicsParams dynamics;
  CRConfig cr;

  void validate() const;
  int observation_size() const;
};

void to_json(nlohmann::json& j, const EnvConfig& c);
void from_json(const nlohmann::json& j, EnvConfig& c);

/// Hidden lateral path around which replaced obstacles are placed.
struct ReferenceTrajectory {
  std::vector<double> y;

  /// Value at a step clamped to the stored range.
  double at(long step) const;
};

ReferenceTrajectory reference_trajectory(std::uint64_t seed, const EnvConfig& cfg);

struct PassingEvent {
  int obstacle_id = 0;
  int step = 0;
  PassingRule side = PassingRule::right;
  bool violation = false;
};

/// Longitudinal time-to-collision from linear motion.
inline double ttc(double x_obstacle, double vx_obstacle, double x_agent, double vx_agent) {
  return (x_obstacle - x_agent) / (vx_agent - vx_obstacle);
}

/// Per-obstacle quantities needed for crossing detection at one step.
struct CrossingState {
  int obstacle_id = 0;
  PassingRule rule = PassingRule::right;
  double gap = 0.0;         ///< x of the linear part minus x_agent
  double y_obstacle = 0.0;  ///< actual lateral position
};

/// An event fires when the longitudinal gap goes from >= 0 to < 0 for the
/// same obstacle; the side compares lateral positions after the step.
std::vector<PassingEvent> detect_passing_events(std::span<const CrossingState> prev,
                                                std::span<const CrossingState> next,
                                                double y_agent, int step);

/// TTC of a new obstacle: U(max, max + dttc_max) over the rule block.
double sample_replacement_ttc(std::span<const double> block_ttcs, double dttc_max, Rng& rng);

struct Placement {
  ObstacleSpec spec;  ///< initial_position is the linear position at the placement step
  double ttc = 0.0;
};

/// Places an obstacle whose linear part reaches the agent's x after `new_ttc`
/// seconds, offset laterally from the reference path by a clamped normal draw.
Placement place_obstacle(double new_ttc, PassingRule rule, const AgentState& agent, int step,
                         const EnvConfig& cfg, const ReferenceTrajectory& ref, Rng& rng);

/// Samples a TTC from the block and places the obstacle.
Placement replace_obstacle(std::span<const double> block_ttcs, PassingRule rule,
                           const AgentState& agent, int step, const EnvConfig& cfg,
                           const ReferenceTrajectory& ref, Rng& rng);

using Observation = Eigen::VectorXd;

/// One obstacle slot. The slot id is stable; the occupant changes on replacement.
struct Obstacle {
  int id = 0;
  PassingRule rule = PassingRule::right;
  ObstacleTrajectory trajectory;
  std::vector<Vec2> history;  ///< last h positions, oldest first
  CRMetrics cr;
  int generation = 0;

  Vec2 position() const { return trajectory.position(); }
  Vec2 linear_position() const { return trajectory.linear_position(); }
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  std::vector<PassingEvent> events;
  bool action_clipped = false;
};

class Environment {
 public:
  /// `predictor` is required in SL mode and ignored otherwise.
  Environment(EnvConfig cfg, std::shared_ptr<const StepModel> predictor = nullptr);

  Observation reset(std::uint64_t seed);
  StepResult step(double action);

  const EnvConfig& config() const { return cfg_; }
  int observation_size() const { return cfg_.observation_size(); }
  int step_index() const { return t_; }
  bool done() const { return t_ >= cfg_.n_steps; }
  const AgentState& agent() const { return agent_; }
  const std::vector<Obstacle>& obstacles() const { return obstacles_; }
  const ReferenceTrajectory& reference() const { return ref_; }
  long clipped_actions() const { return clipped_; }
  long replacements() const { return replacements_; }

  double obstacle_ttc(const Obstacle& o) const;
  Observation observation() const;
  /// Obstacle ids in observation order: right block then left block.
  std::vector<int> observation_order() const;

 private:
  Obstacle make_obstacle(int id, PassingRule rule, const Placement& placement);
  std::vector<CrossingState> crossing_states() const;
  void apply_replacements();
  void refresh_collision_risk();

  EnvConfig cfg_;
  std::shared_ptr<const StepModel> predictor_;
  std::uint64_t seed_ = 0;
  Rng rng_;
  ReferenceTrajectory ref_;
  AgentState agent_;
  std::vector<Obstacle> obstacles_;
  int t_ = 0;
  long clipped_ = 0;
  long replacements_ = 0;
};

/// Episode trace: one CSV row per step, written after reset and after each step.
void write_trace_header(std::ostream& os, const Environment& env);
void write_trace_row(std::ostream& os, const Environment& env, double action, double reward,
                     std::span<const PassingEvent> events);

}  // namespace doa
