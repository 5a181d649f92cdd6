#include "doa/collision_risk.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>

namespace doa {

std::vector<Vec2> agent_linear_trajectory(const AgentState& agent, int first_step, int last_step,
                                          double dt) {
  if (last_step < first_step) throw ConfigError("agent_linear_trajectory: empty span");
  std::vector<Vec2> out;
  out.reserve(static_cast<std::size_t>(last_step - first_step + 1));
  for (int j = first_step; j <= last_step; ++j)
    out.push_back(agent.position + agent.velocity * (static_cast<double>(j) * dt));
  return out;
}

DistanceCurve distance_curve(std::span<const Vec2> obstacle, std::span<const Vec2> agent,
                             int first_step, double dt) {
  if (obstacle.size() != agent.size())
    throw ConfigError("distance_curve: obstacle and agent paths differ in length");
  DistanceCurve curve;
  curve.first_step = first_step;
  curve.dt = dt;
  curve.values.resize(obstacle.size());
  for (std::size_t i = 0; i < obstacle.size(); ++i) curve.values[i] = (obstacle[i] - agent[i]).norm();
  return curve;
}

DistanceCurve smooth_distance(const DistanceCurve& curve, int n) {
  if (n < 0) throw ConfigError("smooth_distance: negative half-window");
  DistanceCurve out = curve;
  const long len = static_cast<long>(curve.values.size());
  // prefix sums keep this O(len)
  std::vector<double> prefix(static_cast<std::size_t>(len) + 1, 0.0);
  for (long i = 0; i < len; ++i) prefix[i + 1] = prefix[i] + curve.values[i];
  for (long i = 0; i < len; ++i) {
    const long lo = std::max(0L, i - n);
    const long hi = std::min(len - 1, i + n);
    out.values[i] = (prefix[hi + 1] - prefix[lo]) / static_cast<double>(hi - lo + 1);
  }
  return out;
}

CpaEstimate estimate_cpa(const DistanceCurve& curve) {
  if (curve.values.empty()) throw ConfigError("estimate_cpa: empty curve");
  const auto it = std::min_element(curve.values.begin(), curve.values.end());
  const int j = curve.first_step + static_cast<int>(it - curve.values.begin());
  return {*it, static_cast<double>(j) * curve.dt};
}

namespace {

void check_history(const StepModel& model, std::span<const Vec2> histories) {
  const std::size_t h = static_cast<std::size_t>(model.window());
  if (histories.empty() || histories.size() % h != 0)
    throw ConfigError("history length must be a multiple of the model window");
}

// Assembles paths for B obstacles; each path covers j = -past .. horizon.
std::vector<std::vector<Vec2>> predicted_paths(const StepModel& model,
                                               std::span<const Vec2> histories,
                                               const CRConfig& cfg) {
  check_history(model, histories);
  const int h = model.window();
  const std::size_t B = histories.size() / static_cast<std::size_t>(h);
  const int backward_steps = std::max(0, cfg.past - h + 1);
  const int observed = std::min(h, cfg.past + 1);

  std::vector<std::vector<Vec2>> fwd, bwd;
  if (cfg.horizon > 0) fwd = rollout_batch(model, histories, cfg.horizon, Direction::forward);
  if (backward_steps > 0) bwd = rollout_batch(model, histories, backward_steps, Direction::backward);

  std::vector<std::vector<Vec2>> paths(B);
  for (std::size_t b = 0; b < B; ++b) {
    auto& path = paths[b];
    path.reserve(static_cast<std::size_t>(cfg.past + cfg.horizon + 1));
    for (int k = backward_steps - 1; k >= 0; --k) path.push_back(bwd[b][k]);
    const auto window = histories.subspan(b * h, static_cast<std::size_t>(h));
    for (int k = h - observed; k < h; ++k) path.push_back(window[k]);
    for (int k = 0; k < cfg.horizon; ++k) path.push_back(fwd[b][k]);
  }
  return paths;
}

CRDetail detail_from_path(std::span<const Vec2> path, const AgentState& agent,
                          const CRConfig& cfg) {
  const auto agent_path = agent_linear_trajectory(agent, -cfg.past, cfg.horizon, cfg.dt);
  CRDetail d;
  d.raw = distance_curve(path, agent_path, -cfg.past, cfg.dt);
  d.smoothed = smooth_distance(d.raw, cfg.smoothing);
  d.cpa = estimate_cpa(d.smoothed);
  return d;
}

}  // namespace

std::vector<Vec2> predicted_obstacle_path(const StepModel& model, std::span<const Vec2> history,
                                          const CRConfig& cfg) {
  if (static_cast<int>(history.size()) != model.window())
    throw ConfigError("history must hold exactly one window");
  return predicted_paths(model, history, cfg).front();
}

CRDetail collision_risk_detail(const StepModel& model, std::span<const Vec2> history,
                               const AgentState& agent, const CRConfig& cfg) {
  const auto path = predicted_obstacle_path(model, history, cfg);
  return detail_from_path(path, agent, cfg);
}

CRMetrics collision_risk_for_obstacle(const StepModel& model, std::span<const Vec2> history,
                                      const AgentState& agent, const CRConfig& cfg) {
  const auto d = collision_risk_detail(model, history, agent, cfg);
  return {d.cpa.d_cpa, d.cpa.t_cpa, 0};
}

std::vector<CRMetrics> collision_risk_batch(const StepModel& model,
                                            std::span<const Vec2> histories,
                                            const AgentState& agent, const CRConfig& cfg) {
  const auto paths = predicted_paths(model, histories, cfg);
  std::vector<CRMetrics> out;
  out.reserve(paths.size());
  for (const auto& path : paths) {
    const auto d = detail_from_path(path, agent, cfg);
    out.push_back({d.cpa.d_cpa, d.cpa.t_cpa, 0});
  }
  return out;
}

void write_distance_dump(std::ostream& os, int obstacle_id, const CRDetail& detail, bool header) {
  if (header) os << "obstacle_id,j,raw_distance,smoothed_distance\n";
  os << std::setprecision(10);
  for (std::size_t i = 0; i < detail.raw.values.size(); ++i)
    os << obstacle_id << ',' << detail.raw.first_step + static_cast<int>(i) << ','
       << detail.raw.values[i] << ',' << detail.smoothed.values[i] << '\n';
}

}  // namespace doa
