#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "doa/common.hpp"
#include "doa/trajectory_predictor.hpp"

namespace doa {

struct AgentState {
  Vec2 position = Vec2::Zero();
  Vec2 velocity = Vec2::Zero();
  double lateral_acceleration = 0.0;
};

/// Distances indexed by relative step j = first_step .. first_step + size - 1.
struct DistanceCurve {
  std::vector<double> values;
  int first_step = 0;
  double dt = 5.0;

  int last_step() const { return first_step + static_cast<int>(values.size()) - 1; }
  double at_step(int j) const { return values.at(static_cast<std::size_t>(j - first_step)); }
};

struct CpaEstimate {
  double d_cpa = 0.0;  ///< meters
  double t_cpa = 0.0;  ///< seconds, negative when the approach lies in the past
};

struct CRMetrics {
  double d_cpa_hat = 0.0;
  double t_cpa_hat = 0.0;
  int age = 0;  ///< steps since the last refresh
};

struct CRConfig {
  int horizon = 100;  ///< forecast steps T
  int past = 100;     ///< backward span H_past
  int smoothing = 10; ///< half-window n of the symmetric moving average
  double dt = 5.0;
};

/// position + velocity * (j * dt) for j = first_step .. last_step.
std::vector<Vec2> agent_linear_trajectory(const AgentState& agent, int first_step, int last_step,
                                          double dt);

DistanceCurve distance_curve(std::span<const Vec2> obstacle, std::span<const Vec2> agent,
                             int first_step, double dt);

/// Centered moving average over 2n+1 samples; the window shrinks to the
/// available samples near both ends.
DistanceCurve smooth_distance(const DistanceCurve& curve, int n);

/// Global minimum; ties resolve to the earliest step.
CpaEstimate estimate_cpa(const DistanceCurve& curve);

/// Predicted obstacle path over j in [-past, horizon]: backward rollout for
/// j <= -h, the observed window for -h < j <= 0, forward rollout for j > 0.
std::vector<Vec2> predicted_obstacle_path(const StepModel& model, std::span<const Vec2> history,
                                          const CRConfig& cfg);

struct CRDetail {
  DistanceCurve raw;
  DistanceCurve smoothed;
  CpaEstimate cpa;
};

/// Full pipeline for one obstacle, keeping the intermediate curves.
CRDetail collision_risk_detail(const StepModel& model, std::span<const Vec2> history,
                               const AgentState& agent, const CRConfig& cfg);

CRMetrics collision_risk_for_obstacle(const StepModel& model, std::span<const Vec2> history,
                                      const AgentState& agent, const CRConfig& cfg);

/// Batched variant: `histories` stores one window per obstacle back to back.
std::vector<CRMetrics> collision_risk_batch(const StepModel& model,
                                            std::span<const Vec2> histories,
                                            const AgentState& agent, const CRConfig& cfg);

/// Rows "obstacle_id, j, raw_distance, smoothed_distance".
void write_distance_dump(std::ostream& os, int obstacle_id, const CRDetail& detail,
                         bool header = true);

}  // namespace doa
