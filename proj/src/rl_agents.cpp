#include "doa/rl_agents.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace doa {

std::string_view to_string(Algorithm algo) { return algo == Algorithm::td3 ? "td3" : "sac"; }

Algorithm algorithm_from_string(std::string_view name) {
  if (name == "td3") return Algorithm::td3;
  if (name == "sac") return Algorithm::sac;
  throw ConfigError("unknown algorithm: " + std::string(name));
}

void AlgoConfig::validate() const {
  if (!(gamma >= 0 && gamma < 1)) throw ConfigError("gamma must lie in [0, 1)");
  if (batch_size < 1 || buffer_size < batch_size) throw ConfigError("invalid batch/buffer size");
  if (history < 1 || hidden < 1) throw ConfigError("history and hidden must be positive");
  if (!(tau >= 0 && tau <= 1)) throw ConfigError("tau must lie in [0, 1]");
  if (policy_delay < 1) throw ConfigError("policy_delay must be >= 1");
  if (!(initial_temperature > 0)) throw ConfigError("initial temperature must be > 0");
}

void to_json(nlohmann::json& j, const AlgoConfig& c) {
  j = nlohmann::json{{"gamma", c.gamma},
                     {"batch_size", c.batch_size},
                     {"buffer_size", c.buffer_size},
                     {"actor_lr", c.actor_lr},
                     {"critic_lr", c.critic_lr},
                     {"history", c.history},
                     {"hidden", c.hidden},
                     {"tau", c.tau},
                     {"target_noise", c.target_noise},
                     {"target_noise_clip", c.target_noise_clip},
                     {"policy_delay", c.policy_delay},
                     {"exploration_noise", c.exploration_noise},
                     {"initial_temperature", c.initial_temperature},
                     {"temperature_lr", c.temperature_lr},
                     {"target_entropy", c.target_entropy},
                     {"log_std_min", c.log_std_min},
                     {"log_std_max", c.log_std_max}};
}

void from_json(const nlohmann::json& j, AlgoConfig& c) {
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("gamma", c.gamma);
  get("batch_size", c.batch_size);
  get("buffer_size", c.buffer_size);
  get("actor_lr", c.actor_lr);
  get("critic_lr", c.critic_lr);
  get("history", c.history);
  get("hidden", c.hidden);
  get("tau", c.tau);
  get("target_noise", c.target_noise);
  get("target_noise_clip", c.target_noise_clip);
  get("policy_delay", c.policy_delay);
  get("exploration_noise", c.exploration_noise);
  get("initial_temperature", c.initial_temperature);
  get("temperature_lr", c.temperature_lr);
  get("target_entropy", c.target_entropy);
  get("log_std_min", c.log_std_min);
  get("log_std_max", c.log_std_max);
}

History make_history(std::span<const Observation> episode, int t, int l, int obs_dim) {
  if (t < 0) throw ConfigError("make_history: negative step");
  if (t > static_cast<int>(episode.size())) throw ConfigError("make_history: step beyond episode");
  History h;
  h.reserve(static_cast<std::size_t>(l));
  const int available = std::min(t, l);
  for (int k = 0; k < l - available; ++k) h.push_back(Observation::Zero(obs_dim));
  for (int k = t - available; k < t; ++k) h.push_back(episode[k]);
  return h;
}

namespace {

nn::Sequence history_sequence(const History& h) {
  nn::Sequence seq;
  seq.reserve(h.size());
  for (const auto& o : h) seq.emplace_back(o);
  return seq;
}

}  // namespace

Batch make_batch(std::span<const Transition> transitions) {
  if (transitions.empty()) throw ConfigError("make_batch: no transitions");
  const long B = static_cast<long>(transitions.size());
  const long d = transitions.front().observation.size();
  const std::size_t l = transitions.front().history.size();
  Batch b;
  b.history.assign(l, nn::Matrix(d, B));
  b.next_history.assign(l, nn::Matrix(d, B));
  b.observation.resize(d, B);
  b.next_observation.resize(d, B);
  b.action.resize(1, B);
  b.reward.resize(1, B);
  b.done.resize(1, B);
  for (long i = 0; i < B; ++i) {
    const auto& t = transitions[i];
    for (std::size_t k = 0; k < l; ++k) {
      b.history[k].col(i) = t.history[k];
      b.next_history[k].col(i) = t.next_history[k];
    }
    b.observation.col(i) = t.observation;
    b.next_observation.col(i) = t.next_observation;
    b.action(0, i) = t.action;
    b.reward(0, i) = t.reward;
    b.done(0, i) = t.done ? 1.0 : 0.0;
  }
  return b;
}

ReplayBuffer::ReplayBuffer(long capacity, int obs_dim, int history)
    : capacity_(capacity), obs_dim_(obs_dim), history_(history) {
  if (capacity < 1) throw ConfigError("replay capacity must be positive");
}

void ReplayBuffer::add(const Transition& t) {
  if (t.observation.size() != obs_dim_ || static_cast<int>(t.history.size()) != history_)
    throw ConfigError("transition shape does not match the replay buffer");
  const std::size_t d = static_cast<std::size_t>(obs_dim_);
  const std::size_t hd = d * static_cast<std::size_t>(history_);
  if (size_ < capacity_ && next_ == size_) {
    hist_.resize(hist_.size() + hd);
    obs_.resize(obs_.size() + d);
    next_obs_.resize(next_obs_.size() + d);
    action_.push_back(0.0);
    reward_.push_back(0.0);
    done_.push_back(0);
  }
  const std::size_t i = static_cast<std::size_t>(next_);
  for (int k = 0; k < history_; ++k)
    for (std::size_t r = 0; r < d; ++r) hist_[i * hd + k * d + r] = static_cast<float>(t.history[k](r));
  for (std::size_t r = 0; r < d; ++r) {
    obs_[i * d + r] = static_cast<float>(t.observation(r));
    next_obs_[i * d + r] = static_cast<float>(t.next_observation(r));
  }
  action_[i] = t.action;
  reward_[i] = t.reward;
  done_[i] = t.done ? 1 : 0;
  next_ = (next_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

Transition ReplayBuffer::get(long index) const {
  if (index < 0 || index >= size_) throw std::out_of_range("replay index");
  const std::size_t d = static_cast<std::size_t>(obs_dim_);
  const std::size_t hd = d * static_cast<std::size_t>(history_);
  const std::size_t i = static_cast<std::size_t>(index);
  Transition t;
  auto vec = [d](const float* p) {
    Observation o(static_cast<long>(d));
    for (std::size_t r = 0; r < d; ++r) o(static_cast<long>(r)) = p[r];
    return o;
  };
  for (int k = 0; k < history_; ++k) t.history.push_back(vec(&hist_[i * hd + k * d]));
  t.observation = vec(&obs_[i * d]);
  t.next_observation = vec(&next_obs_[i * d]);
  t.action = action_[i];
  t.reward = reward_[i];
  t.done = done_[i] != 0;
  t.next_history.assign(t.history.begin() + 1, t.history.end());
  t.next_history.push_back(t.observation);
  return t;
}

Batch ReplayBuffer::sample(int batch_size, Rng& rng) const {
  if (size_ < batch_size) throw ConfigError("replay buffer holds fewer transitions than a batch");
  const long B = batch_size;
  const long d = obs_dim_;
  const std::size_t hd = static_cast<std::size_t>(d) * static_cast<std::size_t>(history_);
  Batch b;
  b.history.assign(static_cast<std::size_t>(history_), nn::Matrix(d, B));
  b.observation.resize(d, B);
  b.next_observation.resize(d, B);
  b.action.resize(1, B);
  b.reward.resize(1, B);
  b.done.resize(1, B);
  std::uniform_int_distribution<long> pick(0, size_ - 1);
  for (long c = 0; c < B; ++c) {
    const std::size_t i = static_cast<std::size_t>(pick(rng));
    for (int k = 0; k < history_; ++k)
      for (long r = 0; r < d; ++r) b.history[k](r, c) = hist_[i * hd + k * d + r];
    for (long r = 0; r < d; ++r) {
      b.observation(r, c) = obs_[i * d + r];
      b.next_observation(r, c) = next_obs_[i * d + r];
    }
    b.action(0, c) = action_[i];
    b.reward(0, c) = reward_[i];
    b.done(0, c) = done_[i];
  }
  b.next_history.assign(b.history.begin() + 1, b.history.end());
  b.next_history.push_back(b.observation);
  return b;
}

RecurrentNet::RecurrentNet(int mem_input, int cfe_input, int hidden, int outputs, Rng& rng,
                           const std::string& name)
    : hidden_(hidden),
      mem_(mem_input, hidden, rng, name + ".mem"),
      cfe_(cfe_input, hidden, nn::Activation::relu, rng, name + ".cfe"),
      pi_hidden_(2 * hidden, hidden, nn::Activation::relu, rng, name + ".pi"),
      pi_out_(hidden, outputs, nn::Activation::identity, rng, name + ".out") {}

nn::Matrix RecurrentNet::forward(std::span<const nn::Matrix> history, const nn::Matrix& current) {
  const nn::Matrix m = mem_.forward(history);
  const nn::Matrix c = cfe_.forward(current);
  nn::Matrix z(2 * hidden_, current.cols());
  z.topRows(hidden_) = m;
  z.bottomRows(hidden_) = c;
  return pi_out_.forward(pi_hidden_.forward(z));
}

nn::Matrix RecurrentNet::infer(std::span<const nn::Matrix> history,
                               const nn::Matrix& current) const {
  nn::Matrix z(2 * hidden_, current.cols());
  z.topRows(hidden_) = mem_.infer(history);
  z.bottomRows(hidden_) = cfe_.infer(current);
  return pi_out_.infer(pi_hidden_.infer(z));
}

nn::Matrix RecurrentNet::backward(const nn::Matrix& dout) {
  const nn::Matrix dz = pi_hidden_.backward(pi_out_.backward(dout));
  mem_.backward(dz.topRows(hidden_));
  return cfe_.backward(dz.bottomRows(hidden_));
}

std::vector<nn::Param*> RecurrentNet::params() {
  std::vector<nn::Param*> out;
  mem_.collect(out);
  cfe_.collect(out);
  pi_hidden_.collect(out);
  pi_out_.collect(out);
  return out;
}

namespace {

nn::Matrix stack_action(const nn::Matrix& o, const nn::Matrix& a) {
  nn::Matrix x(o.rows() + 1, o.cols());
  x.topRows(o.rows()) = o;
  x.bottomRows(1) = a;
  return x;
}

}  // namespace

Critic::Critic(int obs_dim, int hidden, Rng& rng, const std::string& name)
    : net_(obs_dim, obs_dim + 1, hidden, 1, rng, name) {}

nn::Matrix Critic::forward(std::span<const nn::Matrix> h, const nn::Matrix& o,
                           const nn::Matrix& a) {
  return net_.forward(h, stack_action(o, a));
}

nn::Matrix Critic::infer(std::span<const nn::Matrix> h, const nn::Matrix& o,
                         const nn::Matrix& a) const {
  return net_.infer(h, stack_action(o, a));
}

nn::Matrix Critic::backward(const nn::Matrix& dq) {
  const nn::Matrix dx = net_.backward(dq);
  return dx.bottomRows(1);
}

nn::Matrix twin_min_target(const nn::Matrix& r, const nn::Matrix& done, const nn::Matrix& q1,
                           const nn::Matrix& q2, double gamma) {
  return (r.array() + gamma * (1.0 - done.array()) * q1.array().min(q2.array())).matrix();
}

nn::Matrix soft_target(const nn::Matrix& r, const nn::Matrix& done, const nn::Matrix& q1,
                       const nn::Matrix& q2, const nn::Matrix& logp, double alpha, double gamma) {
  return (r.array() +
          gamma * (1.0 - done.array()) * (q1.array().min(q2.array()) - alpha * logp.array()))
      .matrix();
}

void Agent::save(const std::filesystem::path& path) const { write_json_file(path, checkpoint()); }

void Agent::load(const std::filesystem::path& path) { restore(read_json_file(path)); }

namespace {

double critic_step(Critic& critic, nn::Adam& opt, const Batch& b, const nn::Matrix& y) {
  opt.zero_grad();
  const nn::Matrix q = critic.forward(b.history, b.observation, b.action);
  const nn::Matrix err = q - y;
  const double loss = err.squaredNorm() / static_cast<double>(b.size());
  if (!std::isfinite(loss)) throw DivergenceError("critic loss is not finite");
  critic.backward(err * (2.0 / static_cast<double>(b.size())));
  opt.step();
  return loss;
}

std::string rng_state(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

void set_rng_state(Rng& rng, const std::string& s) {
  std::istringstream is(s);
  is >> rng;
}

nlohmann::json common_checkpoint(Algorithm algo, const AlgoConfig& cfg, int obs_dim,
                                 long update_calls, const Rng& rng) {
  nlohmann::json j;
  j["format"] = "doa-agent";
  j["version"] = 1;
  j["algorithm"] = std::string(to_string(algo));
  j["observation_size"] = obs_dim;
  j["config"] = cfg;
  j["config_hash"] = fnv1a(nlohmann::json(cfg).dump());
  j["update_calls"] = update_calls;
  j["rng"] = rng_state(rng);
  return j;
}

}  // namespace

Td3Agent::Td3Agent(int obs_dim, const AlgoConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  cfg_ = cfg;
  obs_dim_ = obs_dim;
  rng_.seed(derive_seed(seed, 0x746433));
  Rng init(derive_seed(seed, 0x696e6974));
  actor_ = RecurrentNet(obs_dim, obs_dim, cfg.hidden, 1, init, "actor");
  critic1_ = Critic(obs_dim, cfg.hidden, init, "critic1");
  critic2_ = Critic(obs_dim, cfg.hidden, init, "critic2");
  actor_t_ = actor_;
  critic1_t_ = critic1_;
  critic2_t_ = critic2_;
  actor_opt_ = nn::Adam(actor_.params(), cfg.actor_lr);
  critic1_opt_ = nn::Adam(critic1_.params(), cfg.critic_lr);
  critic2_opt_ = nn::Adam(critic2_.params(), cfg.critic_lr);
}

double Td3Agent::act(const Observation& o, const History& h, bool explore) {
  const double mu = std::tanh(actor_.infer(history_sequence(h), o)(0, 0));
  if (!explore) return mu;
  return explore_action(mu, normal(rng_, 0.0, cfg_.exploration_noise));
}

UpdateStats Td3Agent::update(const Batch& b) {
  ++update_calls_;
  UpdateStats stats;
  const long B = b.size();

  nn::Matrix next_action = actor_t_.infer(b.next_history, b.next_observation).array().tanh().matrix();
  for (long i = 0; i < B; ++i) {
    const double noise = clip_noise(normal(rng_, 0.0, cfg_.target_noise), cfg_.target_noise_clip);
    next_action(0, i) = std::clamp(next_action(0, i) + noise, -1.0, 1.0);
  }
  const nn::Matrix q1n = critic1_t_.infer(b.next_history, b.next_observation, next_action);
  const nn::Matrix q2n = critic2_t_.infer(b.next_history, b.next_observation, next_action);
  const nn::Matrix y = twin_min_target(b.reward, b.done, q1n, q2n, cfg_.gamma);

  stats.critic_loss = critic_step(critic1_, critic1_opt_, b, y) + critic_step(critic2_, critic2_opt_, b, y);

  if (update_calls_ % cfg_.policy_delay == 0) {
    actor_opt_.zero_grad();
    const nn::Matrix a = actor_.forward(b.history, b.observation).array().tanh().matrix();
    const nn::Matrix q = critic1_.forward(b.history, b.observation, a);
    stats.actor_loss = -q.mean();
    const nn::Matrix dq = nn::Matrix::Constant(1, B, -1.0 / static_cast<double>(B));
    const nn::Matrix da = critic1_.backward(dq);
    actor_.backward((da.array() * (1.0 - a.array().square())).matrix());
    actor_opt_.step();
    if (!nn::all_finite(actor_.params())) throw DivergenceError("actor parameters are not finite");
    stats.actor_updated = true;

    nn::polyak_update(actor_t_.params(), actor_.params(), cfg_.tau);
    nn::polyak_update(critic1_t_.params(), critic1_.params(), cfg_.tau);
    nn::polyak_update(critic2_t_.params(), critic2_.params(), cfg_.tau);
  }
  return stats;
}

nlohmann::json Td3Agent::checkpoint() const {
  auto* self = const_cast<Td3Agent*>(this);
  auto j = common_checkpoint(Algorithm::td3, cfg_, obs_dim_, update_calls_, rng_);
  j["networks"] = {{"actor", nn::params_to_json(self->actor_.params())},
                   {"actor_target", nn::params_to_json(self->actor_t_.params())},
                   {"critic1", nn::params_to_json(self->critic1_.params())},
                   {"critic2", nn::params_to_json(self->critic2_.params())},
                   {"critic1_target", nn::params_to_json(self->critic1_t_.params())},
                   {"critic2_target", nn::params_to_json(self->critic2_t_.params())}};
  j["optimizers"] = {{"actor", actor_opt_.state()},
                     {"critic1", critic1_opt_.state()},
                     {"critic2", critic2_opt_.state()}};
  return j;
}

void Td3Agent::restore(const nlohmann::json& j) {
  if (j.at("algorithm") != "td3") throw ConfigError("checkpoint is not a TD3 agent");
  const auto& n = j.at("networks");
  nn::params_from_json(actor_.params(), n.at("actor"));
  nn::params_from_json(actor_t_.params(), n.at("actor_target"));
  nn::params_from_json(critic1_.params(), n.at("critic1"));
  nn::params_from_json(critic2_.params(), n.at("critic2"));
  nn::params_from_json(critic1_t_.params(), n.at("critic1_target"));
  nn::params_from_json(critic2_t_.params(), n.at("critic2_target"));
  if (j.contains("optimizers")) {
    actor_opt_.load_state(j["optimizers"].at("actor"));
    critic1_opt_.load_state(j["optimizers"].at("critic1"));
    critic2_opt_.load_state(j["optimizers"].at("critic2"));
  }
  update_calls_ = j.value("update_calls", 0L);
  if (j.contains("rng")) set_rng_state(rng_, j.at("rng").get<std::string>());
}

SacAgent::SacAgent(int obs_dim, const AlgoConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  cfg_ = cfg;
  obs_dim_ = obs_dim;
  rng_.seed(derive_seed(seed, 0x736163));
  Rng init(derive_seed(seed, 0x696e6974));
  actor_ = RecurrentNet(obs_dim, obs_dim, cfg.hidden, 2, init, "actor");
  critic1_ = Critic(obs_dim, cfg.hidden, init, "critic1");
  critic2_ = Critic(obs_dim, cfg.hidden, init, "critic2");
  critic1_t_ = critic1_;
  critic2_t_ = critic2_;
  log_alpha_ = nn::Param("log_alpha", nn::Matrix::Constant(1, 1, std::log(cfg.initial_temperature)));
  actor_opt_ = nn::Adam(actor_.params(), cfg.actor_lr);
  critic1_opt_ = nn::Adam(critic1_.params(), cfg.critic_lr);
  critic2_opt_ = nn::Adam(critic2_.params(), cfg.critic_lr);
  alpha_opt_ = nn::Adam({&log_alpha_}, cfg.temperature_lr);
}

double SacAgent::alpha() const { return std::exp(log_alpha_.value(0, 0)); }

SacAgent::Sample SacAgent::sample(const nn::Matrix& head, Rng& rng) const {
  const long B = head.cols();
  Sample s;
  s.mean = head.row(0);
  s.log_std.resize(1, B);
  s.clamped.resize(1, B);
  s.eps.resize(1, B);
  s.action.resize(1, B);
  s.logp.resize(1, B);
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  for (long i = 0; i < B; ++i) {
    const double raw = head(1, i);
    const double ls = std::clamp(raw, cfg_.log_std_min, cfg_.log_std_max);
    s.log_std(0, i) = ls;
    s.clamped(0, i) = ls != raw ? 1.0 : 0.0;
    const double eps = normal(rng, 0.0, 1.0);
    const double a = std::tanh(s.mean(0, i) + std::exp(ls) * eps);
    s.eps(0, i) = eps;
    s.action(0, i) = a;
    s.logp(0, i) = -0.5 * eps * eps - ls - half_log_2pi - std::log(1.0 - a * a + 1e-6);
  }
  return s;
}

double SacAgent::act(const Observation& o, const History& h, bool explore) {
  const nn::Matrix head = actor_.infer(history_sequence(h), o);
  if (!explore) return std::tanh(head(0, 0));
  return sample(head, rng_).action(0, 0);
}

double SacAgent::update_temperature(const nn::Matrix& logp) {
  alpha_opt_.zero_grad();
  const double grad = -(logp.array() + cfg_.target_entropy).mean();
  log_alpha_.grad(0, 0) = grad;
  alpha_opt_.step();
  return grad;
}

UpdateStats SacAgent::update(const Batch& b) {
  ++update_calls_;
  UpdateStats stats;
  const long B = b.size();
  const double alpha_now = alpha();

  const Sample next = sample(actor_.infer(b.next_history, b.next_observation), rng_);
  const nn::Matrix q1n = critic1_t_.infer(b.next_history, b.next_observation, next.action);
  const nn::Matrix q2n = critic2_t_.infer(b.next_history, b.next_observation, next.action);
  const nn::Matrix y = soft_target(b.reward, b.done, q1n, q2n, next.logp, alpha_now, cfg_.gamma);

  stats.critic_loss = critic_step(critic1_, critic1_opt_, b, y) + critic_step(critic2_, critic2_opt_, b, y);

  // Reparameterized actor step on mean(alpha * logp - min(Q1, Q2)).
  actor_opt_.zero_grad();
  const nn::Matrix head = actor_.forward(b.history, b.observation);
  const Sample s = sample(head, rng_);
  const nn::Matrix q1 = critic1_.forward(b.history, b.observation, s.action);
  const nn::Matrix q2 = critic2_.forward(b.history, b.observation, s.action);
  nn::Matrix mask1(1, B), mask2(1, B);
  double loss = 0.0;
  for (long i = 0; i < B; ++i) {
    const bool first = q1(0, i) <= q2(0, i);
    mask1(0, i) = first ? 1.0 : 0.0;
    mask2(0, i) = first ? 0.0 : 1.0;
    loss += alpha_now * s.logp(0, i) - std::min(q1(0, i), q2(0, i));
  }
  stats.actor_loss = loss / static_cast<double>(B);
  const nn::Matrix dq_da = critic1_.backward(mask1) + critic2_.backward(mask2);

  nn::Matrix dhead(2, B);
  const double inv_b = 1.0 / static_cast<double>(B);
  for (long i = 0; i < B; ++i) {
    const double a = s.action(0, i);
    const double one_minus = 1.0 - a * a;
    const double du = inv_b * (alpha_now * 2.0 * a * one_minus / (one_minus + 1e-6) -
                               dq_da(0, i) * one_minus);
    dhead(0, i) = du;
    const double dls = du * std::exp(s.log_std(0, i)) * s.eps(0, i) - inv_b * alpha_now;
    dhead(1, i) = s.clamped(0, i) != 0.0 ? 0.0 : dls;
  }
  actor_.backward(dhead);
  actor_opt_.step();
  if (!nn::all_finite(actor_.params())) throw DivergenceError("actor parameters are not finite");
  stats.actor_updated = true;

  update_temperature(s.logp);
  stats.alpha = alpha();

  nn::polyak_update(critic1_t_.params(), critic1_.params(), cfg_.tau);
  nn::polyak_update(critic2_t_.params(), critic2_.params(), cfg_.tau);
  return stats;
}

nlohmann::json SacAgent::checkpoint() const {
  auto* self = const_cast<SacAgent*>(this);
  auto j = common_checkpoint(Algorithm::sac, cfg_, obs_dim_, update_calls_, rng_);
  j["networks"] = {{"actor", nn::params_to_json(self->actor_.params())},
                   {"critic1", nn::params_to_json(self->critic1_.params())},
                   {"critic2", nn::params_to_json(self->critic2_.params())},
                   {"critic1_target", nn::params_to_json(self->critic1_t_.params())},
                   {"critic2_target", nn::params_to_json(self->critic2_t_.params())}};
  j["optimizers"] = {{"actor", actor_opt_.state()},
                     {"critic1", critic1_opt_.state()},
                     {"critic2", critic2_opt_.state()},
                     {"temperature", alpha_opt_.state()}};
  j["log_alpha"] = log_alpha_.value(0, 0);
  return j;
}

void SacAgent::restore(const nlohmann::json& j) {
  if (j.at("algorithm") != "sac") throw ConfigError("checkpoint is not a SAC agent");
  const auto& n = j.at("networks");
  nn::params_from_json(actor_.params(), n.at("actor"));
  nn::params_from_json(critic1_.params(), n.at("critic1"));
  nn::params_from_json(critic2_.params(), n.at("critic2"));
  nn::params_from_json(critic1_t_.params(), n.at("critic1_target"));
  nn::params_from_json(critic2_t_.params(), n.at("critic2_target"));
  if (j.contains("optimizers")) {
    actor_opt_.load_state(j["optimizers"].at("actor"));
    critic1_opt_.load_state(j["optimizers"].at("critic1"));
    critic2_opt_.load_state(j["optimizers"].at("critic2"));
    alpha_opt_.load_state(j["optimizers"].at("temperature"));
  }
  log_alpha_.value(0, 0) = j.at("log_alpha").get<double>();
  update_calls_ = j.value("update_calls", 0L);
  if (j.contains("rng")) set_rng_state(rng_, j.at("rng").get<std::string>());
}

std::unique_ptr<Agent> make_agent(Algorithm algo, int obs_dim, const AlgoConfig& cfg,
                                  std::uint64_t seed) {
  if (algo == Algorithm::td3) return std::make_unique<Td3Agent>(obs_dim, cfg, seed);
  return std::make_unique<SacAgent>(obs_dim, cfg, seed);
}

std::unique_ptr<Agent> load_agent(const std::filesystem::path& path) {
  const auto j = read_json_file(path);
  if (j.value("format", "") != "doa-agent") throw ConfigError("not an agent checkpoint: " + path.string());
  auto agent = make_agent(algorithm_from_string(j.at("algorithm").get<std::string>()),
                          j.at("observation_size").get<int>(), j.at("config").get<AlgoConfig>(), 0);
  agent->restore(j);
  return agent;
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  if (path.extension() == ".json") return nlohmann::json::parse(is);
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                        std::istreambuf_iterator<char>());
  return nlohmann::json::from_cbor(bytes);
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  if (path.extension() == ".json") {
    os << j.dump(1);
    return;
  }
  const auto bytes = nlohmann::json::to_cbor(j);
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace doa
