#include "doa/environment.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

namespace doa {

std::string_view to_string(ObservationMode mode) {
  return mode == ObservationMode::sl ? "sl" : "baseline";
}

ObservationMode mode_from_string(std::string_view name) {
  if (name == "sl") return ObservationMode::sl;
  if (name == "baseline") return ObservationMode::baseline;
  throw ConfigError("unknown observation mode: " + std::string(name));
}

void EnvConfig::validate() const {
  if (n_obstacles < 2 || n_obstacles % 2 != 0)
    throw ConfigError("n_obstacles must be positive and even");
  if (!(a_y_max > 0 && v_max > 0 && dt > 0)) throw ConfigError("a_y_max, v_max, dt must be > 0");
  if (n_steps < 1) throw ConfigError("n_steps must be positive");
  if (!(p_scale > 0 && d_cpa_scale > 0 && t_cpa_scale > 0)) throw ConfigError("scales must be > 0");
  if (!(dttc_max > 0)) throw ConfigError("dttc_max must be > 0");
  if (!(phi_traj >= 0 && phi_traj < 1)) throw ConfigError("phi_traj must lie in [0, 1)");
  if (!(beta_traj > 0 && beta_traj <= 1)) throw ConfigError("beta_traj must lie in (0, 1]");
  if (sigma2_traj < 0 || sigma2_dy < 0) throw ConfigError("variances must be non-negative");
  if (v_x_max < 0 || v_y_max < 0) throw ConfigError("obstacle speed bounds must be >= 0");
  if (!(agent_speed_min > 0 && agent_speed_min <= v_max))
    throw ConfigError("agent_speed_min must lie in (0, v_max]");
  if (!(min_closing_speed > 0)) throw ConfigError("min_closing_speed must be > 0");
  if (v_x_max + min_closing_speed > agent_speed_min)
    throw ConfigError("obstacles must be slower than the agent: v_x_max + min_closing_speed <= agent_speed_min");
  if (cr_refresh_interval < 1) throw ConfigError("cr_refresh_interval must be >= 1");
  dynamics.validate();
}

int EnvConfig::observation_size() const {
  return 3 + (mode == ObservationMode::sl ? 4 : 2) * n_obstacles;
}

void to_json(nlohmann::json& j, const EnvConfig& c) {
  j = nlohmann::json{{"n_obstacles", c.n_obstacles},
                     {"a_y_max", c.a_y_max},
                     {"v_max", c.v_max},
                     {"dt", c.dt},
                     {"n_steps", c.n_steps},
                     {"p_scale", c.p_scale},
                     {"d_cpa_scale", c.d_cpa_scale},
                     {"t_cpa_scale", c.t_cpa_scale},
                     {"dttc_max", c.dttc_max},
                     {"phi_traj", c.phi_traj},
                     {"sigma2_traj", c.sigma2_traj},
                     {"beta_traj", c.beta_traj},
                     {"mu_dy", c.mu_dy},
                     {"sigma2_dy", c.sigma2_dy},
                     {"dy_min", c.dy_min},
                     {"v_x_max", c.v_x_max},
                     {"v_y_max", c.v_y_max},
                     {"agent_speed_min", c.agent_speed_min},
                     {"min_closing_speed", c.min_closing_speed},
                     {"cr_refresh_interval", c.cr_refresh_interval},
                     {"behavior", to_string(c.behavior)},
                     {"mode", to_string(c.mode)},
                     {"dynamics",
                      {{"phi_stoch", c.dynamics.phi_stoch},
                       {"sigma2_stoch", c.dynamics.sigma2_stoch},
                       {"beta_stoch", c.dynamics.beta_stoch},
                       {"v_max", c.dynamics.v_max},
                       {"A_sin", c.dynamics.A_sin},
                       {"T_sin", c.dynamics.T_sin},
                       {"sigma2_sin", c.dynamics.sigma2_sin}}},
                     {"cr",
                      {{"horizon", c.cr.horizon},
                       {"past", c.cr.past},
                       {"smoothing", c.cr.smoothing}}}};
}

void from_json(const nlohmann::json& j, EnvConfig& c) {
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("n_obstacles", c.n_obstacles);
  get("a_y_max", c.a_y_max);
  get("v_max", c.v_max);
  get("dt", c.dt);
  get("n_steps", c.n_steps);
  get("p_scale", c.p_scale);
  get("d_cpa_scale", c.d_cpa_scale);
  get("t_cpa_scale", c.t_cpa_scale);
  get("dttc_max", c.dttc_max);
  get("phi_traj", c.phi_traj);
  get("sigma2_traj", c.sigma2_traj);
  get("beta_traj", c.beta_traj);
  get("mu_dy", c.mu_dy);
  get("sigma2_dy", c.sigma2_dy);
  get("dy_min", c.dy_min);
  get("v_x_max", c.v_x_max);
  get("v_y_max", c.v_y_max);
  get("agent_speed_min", c.agent_speed_min);
  get("min_closing_speed", c.min_closing_speed);
  get("cr_refresh_interval", c.cr_refresh_interval);
  if (j.contains("behavior")) c.behavior = behavior_from_string(j.at("behavior").get<std::string>());
  if (j.contains("mode")) c.mode = mode_from_string(j.at("mode").get<std::string>());
  if (j.contains("dynamics")) {
    const auto& d = j.at("dynamics");
    auto dget = [&d](const char* key, double& field) {
      if (d.contains(key)) d.at(key).get_to(field);
    };
    dget("phi_stoch", c.dynamics.phi_stoch);
    dget("sigma2_stoch", c.dynamics.sigma2_stoch);
    dget("beta_stoch", c.dynamics.beta_stoch);
    dget("v_max", c.dynamics.v_max);
    dget("A_sin", c.dynamics.A_sin);
    dget("T_sin", c.dynamics.T_sin);
    dget("sigma2_sin", c.dynamics.sigma2_sin);
  }
  if (j.contains("cr")) {
    const auto& r = j.at("cr");
    if (r.contains("horizon")) r.at("horizon").get_to(c.cr.horizon);
    if (r.contains("past")) r.at("past").get_to(c.cr.past);
    if (r.contains("smoothing")) r.at("smoothing").get_to(c.cr.smoothing);
  }
  c.dynamics.dt = c.dt;
  c.cr.dt = c.dt;
}

double ReferenceTrajectory::at(long step) const {
  if (y.empty()) return 0.0;
  step = std::clamp(step, 0L, static_cast<long>(y.size()) - 1);
  return y[static_cast<std::size_t>(step)];
}

ReferenceTrajectory reference_trajectory(std::uint64_t seed, const EnvConfig& cfg) {
  Rng rng(derive_seed(seed, 0x726566));
  const double sd = std::sqrt(cfg.sigma2_traj);
  ReferenceTrajectory ref;
  ref.y.resize(static_cast<std::size_t>(cfg.n_steps));
  double b = 0.0;  // B_0
  ref.y[0] = b;
  for (int t = 1; t < cfg.n_steps; ++t) {
    b = cfg.phi_traj * b + normal(rng, 0.0, sd);
    ref.y[t] = cfg.beta_traj * b + (1.0 - cfg.beta_traj) * ref.y[t - 1];
  }
  return ref;
}

std::vector<PassingEvent> detect_passing_events(std::span<const CrossingState> prev,
                                                std::span<const CrossingState> next,
                                                double y_agent, int step) {
  std::vector<PassingEvent> events;
  for (const auto& n : next) {
    const auto p = std::find_if(prev.begin(), prev.end(),
                                [&](const CrossingState& c) { return c.obstacle_id == n.obstacle_id; });
    if (p == prev.end()) continue;
    if (p->gap >= 0.0 && n.gap < 0.0) {
      PassingEvent e;
      e.obstacle_id = n.obstacle_id;
      e.step = step;
      e.side = y_agent < n.y_obstacle ? PassingRule::right : PassingRule::left;
      e.violation = e.side != n.rule;
      events.push_back(e);
    }
  }
  return events;
}

double sample_replacement_ttc(std::span<const double> block_ttcs, double dttc_max, Rng& rng) {
  if (block_ttcs.empty()) throw ConfigError("sample_replacement_ttc: empty block");
  const double hi = *std::max_element(block_ttcs.begin(), block_ttcs.end());
  return uniform(rng, hi, hi + dttc_max);
}

Placement place_obstacle(double new_ttc, PassingRule rule, const AgentState& agent, int step,
                         const EnvConfig& cfg, const ReferenceTrajectory& ref, Rng& rng) {
  Placement out;
  out.ttc = new_ttc;
  double vx = 0.0;
  for (int attempt = 0;; ++attempt) {
    vx = uniform(rng, -cfg.v_x_max, cfg.v_x_max);
    if (std::abs(agent.velocity.x() - vx) >= cfg.min_closing_speed) break;
    if (attempt > 1000) throw ConfigError("cannot sample an obstacle speed with enough closing speed");
  }
  const double vy = uniform(rng, -cfg.v_y_max, cfg.v_y_max);
  const double x = (agent.velocity.x() - vx) * new_ttc + agent.position.x();
  double dy = normal(rng, cfg.mu_dy, std::sqrt(cfg.sigma2_dy));
  dy = std::max(cfg.dy_min, dy);
  const long cross_step = step + std::lround(new_ttc / cfg.dt);
  const double y_ref = ref.at(cross_step);
  const double y = rule == PassingRule::right ? y_ref + dy - vy * new_ttc : y_ref - dy - vy * new_ttc;

  out.spec.initial_position = Vec2(x, y);
  out.spec.velocity = Vec2(vx, vy);
  out.spec.behavior = cfg.behavior;
  out.spec.passing_rule = rule;
  return out;
}

Placement replace_obstacle(std::span<const double> block_ttcs, PassingRule rule,
                           const AgentState& agent, int step, const EnvConfig& cfg,
                           const ReferenceTrajectory& ref, Rng& rng) {
  const double new_ttc = sample_replacement_ttc(block_ttcs, cfg.dttc_max, rng);
  return place_obstacle(new_ttc, rule, agent, step, cfg, ref, rng);
}

Environment::Environment(EnvConfig cfg, std::shared_ptr<const StepModel> predictor)
    : cfg_(std::move(cfg)), predictor_(std::move(predictor)) {
  cfg_.dynamics.dt = cfg_.dt;
  cfg_.cr.dt = cfg_.dt;
  cfg_.validate();
  if (cfg_.mode == ObservationMode::sl && !predictor_)
    throw ConfigError("SL observation mode requires a trajectory predictor");
}

Obstacle Environment::make_obstacle(int id, PassingRule rule, const Placement& placement) {
  const int h = predictor_ ? predictor_->window() : kWindowLength;
  ObstacleSpec spec = placement.spec;
  // Start h-1 steps in the past so that a full observed window exists now
  // and the linear part sits at the placement position.
  spec.initial_position -= spec.velocity * (static_cast<double>(h - 1) * cfg_.dt);
  spec.passing_rule = rule;
  spec.noise_seed = derive_seed(seed_, static_cast<std::uint64_t>(id) + 1,
                                static_cast<std::uint64_t>(replacements_) + 1);
  Obstacle o{id, rule, ObstacleTrajectory(spec, cfg_.dynamics), {}, {}, 0};
  o.history.push_back(o.trajectory.position());
  for (int k = 1; k < h; ++k) {
    o.trajectory.advance();
    o.history.push_back(o.trajectory.position());
  }
  return o;
}

Observation Environment::reset(std::uint64_t seed) {
  seed_ = seed;
  rng_.seed(derive_seed(seed, 0x656e76));
  t_ = 0;
  clipped_ = 0;
  replacements_ = 0;
  ref_ = reference_trajectory(seed, cfg_);

  agent_ = AgentState{};
  agent_.velocity = Vec2(uniform(rng_, cfg_.agent_speed_min, cfg_.v_max), 0.0);

  obstacles_.clear();
  const int half = cfg_.n_obstacles / 2;
  for (PassingRule rule : {PassingRule::right, PassingRule::left}) {
    std::vector<double> block;
    for (int k = 0; k < half; ++k) {
      const int id = (rule == PassingRule::right ? 0 : half) + k;
      const double new_ttc = block.empty() ? uniform(rng_, 0.0, cfg_.dttc_max)
                                           : sample_replacement_ttc(block, cfg_.dttc_max, rng_);
      const auto placement = place_obstacle(new_ttc, rule, agent_, t_, cfg_, ref_, rng_);
      block.push_back(new_ttc);
      obstacles_.push_back(make_obstacle(id, rule, placement));
      ++replacements_;
    }
  }
  if (cfg_.mode == ObservationMode::sl) refresh_collision_risk();
  return observation();
}

double Environment::obstacle_ttc(const Obstacle& o) const {
  return ttc(o.linear_position().x(), o.trajectory.spec().velocity.x(), agent_.position.x(),
             agent_.velocity.x());
}

std::vector<CrossingState> Environment::crossing_states() const {
  std::vector<CrossingState> out;
  out.reserve(obstacles_.size());
  for (const auto& o : obstacles_)
    out.push_back({o.id, o.rule, o.linear_position().x() - agent_.position.x(), o.position().y()});
  return out;
}

void Environment::apply_replacements() {
  for (PassingRule rule : {PassingRule::right, PassingRule::left}) {
    for (;;) {
      std::vector<double> block;
      int oldest = -1, negatives = 0;
      double oldest_ttc = 0.0;
      for (std::size_t i = 0; i < obstacles_.size(); ++i) {
        if (obstacles_[i].rule != rule) continue;
        const double v = obstacle_ttc(obstacles_[i]);
        block.push_back(v);
        if (v < 0.0) {
          ++negatives;
          if (oldest < 0 || v < oldest_ttc) {
            oldest = static_cast<int>(i);
            oldest_ttc = v;
          }
        }
      }
      if (negatives < 2) break;
      const auto placement = replace_obstacle(block, rule, agent_, t_, cfg_, ref_, rng_);
      Obstacle& slot = obstacles_[static_cast<std::size_t>(oldest)];
      const CRMetrics kept = slot.cr;
      const int generation = slot.generation + 1;
      slot = make_obstacle(slot.id, rule, placement);
      slot.cr = kept;  // served until the next scheduled refresh
      slot.generation = generation;
      ++replacements_;
    }
  }
}

void Environment::refresh_collision_risk() {
  std::vector<Vec2> histories;
  histories.reserve(obstacles_.size() * static_cast<std::size_t>(predictor_->window()));
  for (const auto& o : obstacles_) histories.insert(histories.end(), o.history.begin(), o.history.end());
  const auto metrics = collision_risk_batch(*predictor_, histories, agent_, cfg_.cr);
  for (std::size_t i = 0; i < obstacles_.size(); ++i) obstacles_[i].cr = metrics[i];
}

StepResult Environment::step(double action) {
  if (done()) throw ConfigError("step() called on a finished episode; call reset()");
  StepResult result;
  if (!std::isfinite(action)) throw ConfigError("action must be finite");
  const double a = std::clamp(action, -1.0, 1.0);
  if (a != action) {
    result.action_clipped = true;
    ++clipped_;
  }
  const auto before = crossing_states();

  // Euler for the lateral speed, ballistic (trapezoidal) update for position.
  const Vec2 v_old = agent_.velocity;
  agent_.lateral_acceleration = cfg_.a_y_max * a;
  agent_.velocity.y() += agent_.lateral_acceleration * cfg_.dt;
  agent_.position += 0.5 * (v_old + agent_.velocity) * cfg_.dt;

  for (auto& o : obstacles_) {
    o.trajectory.advance();
    std::rotate(o.history.begin(), o.history.begin() + 1, o.history.end());
    o.history.back() = o.trajectory.position();
    ++o.cr.age;
  }
  ++t_;

  result.events = detect_passing_events(before, crossing_states(), agent_.position.y(), t_);
  for (const auto& e : result.events)
    if (e.violation) result.reward -= 1.0;

  apply_replacements();
  if (cfg_.mode == ObservationMode::sl && t_ % cfg_.cr_refresh_interval == 0)
    refresh_collision_risk();

  result.observation = observation();
  result.done = done();
  return result;
}

std::vector<int> Environment::observation_order() const {
  std::vector<int> order;
  for (PassingRule rule : {PassingRule::right, PassingRule::left}) {
    std::vector<int> block;
    for (std::size_t i = 0; i < obstacles_.size(); ++i)
      if (obstacles_[i].rule == rule) block.push_back(static_cast<int>(i));
    std::vector<double> key(obstacles_.size());
    for (int i : block)
      key[i] = cfg_.mode == ObservationMode::sl
                   ? obstacles_[i].cr.t_cpa_hat
                   : (agent_.position - obstacles_[i].position()).norm();
    std::stable_sort(block.begin(), block.end(), [&](int a, int b) {
      if (key[a] != key[b]) return key[a] < key[b];
      return obstacles_[a].id < obstacles_[b].id;
    });
    for (int i : block) order.push_back(obstacles_[i].id);
  }
  return order;
}

Observation Environment::observation() const {
  Observation o(observation_size());
  o(0) = agent_.lateral_acceleration / cfg_.a_y_max;
  o(1) = agent_.velocity.x() / cfg_.v_max;
  o(2) = agent_.velocity.y() / cfg_.v_max;
  long k = 3;
  const bool sl = cfg_.mode == ObservationMode::sl;
  for (int id : observation_order()) {
    const auto it = std::find_if(obstacles_.begin(), obstacles_.end(),
                                 [id](const Obstacle& ob) { return ob.id == id; });
    const Vec2 rel = (agent_.position - it->position()) / cfg_.p_scale;
    o(k++) = rel.x();
    o(k++) = rel.y();
    if (sl) {
      o(k++) = it->cr.d_cpa_hat / cfg_.d_cpa_scale;
      o(k++) = it->cr.t_cpa_hat / cfg_.t_cpa_scale;
    }
  }
  return o;
}

void write_trace_header(std::ostream& os, const Environment& env) {
  os << "step,x,y,vx,vy,ay,action,reward,violations";
  for (const auto& o : env.obstacles())
    os << ",o" << o.id << "_rule,o" << o.id << "_x,o" << o.id << "_y,o" << o.id << "_dcpa,o"
       << o.id << "_tcpa,o" << o.id << "_gen";
  os << '\n';
}

void write_trace_row(std::ostream& os, const Environment& env, double action, double reward,
                     std::span<const PassingEvent> events) {
  const auto& a = env.agent();
  os << std::setprecision(10) << env.step_index() << ',' << a.position.x() << ',' << a.position.y()
     << ',' << a.velocity.x() << ',' << a.velocity.y() << ',' << a.lateral_acceleration << ','
     << action << ',' << reward << ',';
  bool first = true;
  for (const auto& e : events) {
    if (!e.violation) continue;
    os << (first ? "" : ";") << e.obstacle_id;
    first = false;
  }
  for (const auto& o : env.obstacles()) {
    const Vec2 p = o.position();
    os << ',' << to_string(o.rule) << ',' << p.x() << ',' << p.y() << ',' << o.cr.d_cpa_hat << ','
       << o.cr.t_cpa_hat << ',' << o.generation;
  }
  os << '\n';
}

}  // namespace doa
