#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include <json.hpp>

#include "doa/common.hpp"
#include "doa/environment.hpp"
#include "doa/nn.hpp"

namespace doa {

enum class Algorithm { td3, sac };

std::string_view to_string(Algorithm algo);
Algorithm algorithm_from_string(std::string_view name);

struct AlgoConfig {
  double gamma = 0.99;
  int batch_size = 32;
  long buffer_size = 1'000'000;
  double actor_lr = 1e-4;
  double critic_lr = 1e-4;
  int history = 10;
  int hidden = 128;
  double tau = 0.005;
  // TD3
  double target_noise = 0.2;
  double target_noise_clip = 0.5;
  int policy_delay = 2;
  double exploration_noise = 0.1;
  // SAC
  double initial_temperature = 0.2;
  double temperature_lr = 1e-4;
  double target_entropy = -1.0;
  double log_std_min = -20.0;
  double log_std_max = 2.0;

  void validate() const;
};

void to_json(nlohmann::json& j, const AlgoConfig& c);
void from_json(const nlohmann::json& j, AlgoConfig& c);

/// l most recent observations before step t, zero-padded on the left.
using History = std::vector<Observation>;

History make_history(std::span<const Observation> episode, int t, int l, int obs_dim);

struct Transition {
  History history;
  Observation observation;
  double action = 0.0;
  double reward = 0.0;
  Observation next_observation;
  History next_history;
  bool done = false;
};

/// Column-batched transitions. Sequences hold one obs_dim x B matrix per
/// history slot, oldest first.
struct Batch {
  nn::Sequence history;
  nn::Matrix observation;
  nn::Matrix action;  // 1 x B
  nn::Matrix reward;  // 1 x B
  nn::Matrix next_observation;
  nn::Sequence next_history;
  nn::Matrix done;    // 1 x B

  long size() const { return observation.cols(); }
};

Batch make_batch(std::span<const Transition> transitions);

/// Ring buffer storing h_t, o_t and o_{t+1} per transition; h_{t+1} is
/// rebuilt as h_t shifted by one with o_t appended.
class ReplayBuffer {
 public:
  ReplayBuffer(long capacity, int obs_dim, int history);

  void add(const Transition& t);
  long size() const { return size_; }
  long capacity() const { return capacity_; }
  Transition get(long index) const;
  Batch sample(int batch_size, Rng& rng) const;

 private:
  long capacity_;
  int obs_dim_, history_;
  long size_ = 0, next_ = 0;
  std::vector<float> hist_;  // history * obs_dim per entry
  std::vector<float> obs_, next_obs_;
  std::vector<double> action_, reward_;
  std::vector<char> done_;
};

/// MEM (LSTM over the history) and CFE (dense over the current input) feed
/// a PI head on their concatenation.
class RecurrentNet {
 public:
  RecurrentNet() = default;
  RecurrentNet(int mem_input, int cfe_input, int hidden, int outputs, Rng& rng,
               const std::string& name);

  nn::Matrix forward(std::span<const nn::Matrix> history, const nn::Matrix& current);
  nn::Matrix infer(std::span<const nn::Matrix> history, const nn::Matrix& current) const;
  /// Returns the gradient w.r.t. the CFE input.
  nn::Matrix backward(const nn::Matrix& dout);

  std::vector<nn::Param*> params();

 private:
  int hidden_ = 0;
  nn::Lstm mem_;
  nn::Dense cfe_;
  nn::Dense pi_hidden_;
  nn::Dense pi_out_;
};

/// Q(o, a, h); the action is appended to the observation for the CFE.
class Critic {
 public:
  Critic() = default;
  Critic(int obs_dim, int hidden, Rng& rng, const std::string& name);

  nn::Matrix forward(std::span<const nn::Matrix> h, const nn::Matrix& o, const nn::Matrix& a);
  nn::Matrix infer(std::span<const nn::Matrix> h, const nn::Matrix& o, const nn::Matrix& a) const;
  /// Accumulates parameter gradients; returns dQ/da (1 x B).
  nn::Matrix backward(const nn::Matrix& dq);
  std::vector<nn::Param*> params() { return net_.params(); }

 private:
  RecurrentNet net_;
};

struct UpdateStats {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  bool actor_updated = false;
  double alpha = 0.0;
};

// Formula helpers shared by the updates and their tests.
/// r + gamma * (1 - done) * min(q1, q2), elementwise.
nn::Matrix twin_min_target(const nn::Matrix& r, const nn::Matrix& done, const nn::Matrix& q1,
                           const nn::Matrix& q2, double gamma);
/// Soft target with entropy bonus: min(q1, q2) - alpha * logp inside the bootstrap.
nn::Matrix soft_target(const nn::Matrix& r, const nn::Matrix& done, const nn::Matrix& q1,
                       const nn::Matrix& q2, const nn::Matrix& logp, double alpha, double gamma);
inline double clip_noise(double noise, double clip) { return std::clamp(noise, -clip, clip); }
inline double explore_action(double mu, double noise) { return std::clamp(mu + noise, -1.0, 1.0); }

class Agent {
 public:
  virtual ~Agent() = default;
  Agent() = default;
  Agent(const Agent&) = delete;
  Agent& operator=(const Agent&) = delete;

  virtual Algorithm algorithm() const = 0;
  virtual double act(const Observation& o, const History& h, bool explore) = 0;
  virtual UpdateStats update(const Batch& batch) = 0;
  virtual nlohmann::json checkpoint() const = 0;
  virtual void restore(const nlohmann::json& j) = 0;

  const AlgoConfig& config() const { return cfg_; }
  int observation_size() const { return obs_dim_; }
  long update_calls() const { return update_calls_; }

  void save(const std::filesystem::path& path) const;
  void load(const std::filesystem::path& path);

 protected:
  AlgoConfig cfg_;
  int obs_dim_ = 0;
  long update_calls_ = 0;
  Rng rng_;
};

class Td3Agent final : public Agent {
 public:
  Td3Agent(int obs_dim, const AlgoConfig& cfg, std::uint64_t seed);

  Algorithm algorithm() const override { return Algorithm::td3; }
  double act(const Observation& o, const History& h, bool explore) override;
  UpdateStats update(const Batch& batch) override;
  nlohmann::json checkpoint() const override;
  void restore(const nlohmann::json& j) override;

  RecurrentNet& actor() { return actor_; }
  Critic& critic1() { return critic1_; }
  Critic& critic2() { return critic2_; }
  Critic& critic1_target() { return critic1_t_; }
  RecurrentNet& actor_target() { return actor_t_; }

 private:
  RecurrentNet actor_, actor_t_;
  Critic critic1_, critic2_, critic1_t_, critic2_t_;
  nn::Adam actor_opt_, critic1_opt_, critic2_opt_;
};

class SacAgent final : public Agent {
 public:
  SacAgent(int obs_dim, const AlgoConfig& cfg, std::uint64_t seed);

  Algorithm algorithm() const override { return Algorithm::sac; }
  double act(const Observation& o, const History& h, bool explore) override;
  UpdateStats update(const Batch& batch) override;
  nlohmann::json checkpoint() const override;
  void restore(const nlohmann::json& j) override;

  double alpha() const;
  double log_alpha() const { return log_alpha_.value(0, 0); }
  RecurrentNet& actor() { return actor_; }
  Critic& critic1() { return critic1_; }

  struct Sample {
    nn::Matrix action;  // 1 x B
    nn::Matrix logp;    // 1 x B
    nn::Matrix eps;     // 1 x B
    nn::Matrix mean, log_std;
    nn::Matrix clamped;  // 1 where log_std was clamped
  };
  /// Squashed Gaussian sample from a raw head output (2 x B).
  Sample sample(const nn::Matrix& head, Rng& rng) const;
  /// Temperature update only; returns the gradient applied to log(alpha).
  double update_temperature(const nn::Matrix& logp);

 private:
  RecurrentNet actor_;
  Critic critic1_, critic2_, critic1_t_, critic2_t_;
  nn::Param log_alpha_;
  nn::Adam actor_opt_, critic1_opt_, critic2_opt_, alpha_opt_;
};

std::unique_ptr<Agent> make_agent(Algorithm algo, int obs_dim, const AlgoConfig& cfg,
                                  std::uint64_t seed);
/// Rebuilds an agent from a checkpoint file.
std::unique_ptr<Agent> load_agent(const std::filesystem::path& path);

nlohmann::json read_json_file(const std::filesystem::path& path);
/// ".json" files are written as text, anything else as CBOR.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace doa
