#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "doa/rl_agents.hpp"
#include "oracles.hpp"

using namespace doa;
using nn::Matrix;

namespace {

std::vector<Observation> numbered_episode(int n, int d) {
  std::vector<Observation> eps;
  for (int i = 0; i < n; ++i) eps.push_back(Observation::Constant(d, i + 1.0));
  return eps;
}

nn::Sequence random_sequence(int steps, int d, long batch, Rng& rng) {
  nn::Sequence seq;
  for (int k = 0; k < steps; ++k) {
    Matrix m(d, batch);
    for (long i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, -1.0, 1.0);
    seq.push_back(m);
  }
  return seq;
}

Matrix random_matrix(int rows, long cols, Rng& rng) {
  Matrix m(rows, cols);
  for (long i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, -1.0, 1.0);
  return m;
}

Batch random_batch(int d, int l, long B, Rng& rng) {
  std::vector<Transition> ts;
  for (long i = 0; i < B; ++i) {
    Transition t;
    for (int k = 0; k < l; ++k) t.history.push_back(Observation(random_matrix(d, 1, rng)));
    t.observation = random_matrix(d, 1, rng);
    t.next_observation = random_matrix(d, 1, rng);
    t.next_history.assign(t.history.begin() + 1, t.history.end());
    t.next_history.push_back(t.observation);
    t.action = uniform(rng, -1, 1);
    t.reward = -static_cast<double>(i % 2);
    ts.push_back(t);
  }
  return make_batch(ts);
}

std::vector<Matrix> snapshot(const std::vector<nn::Param*>& ps) {
  std::vector<Matrix> out;
  for (auto* p : ps) out.push_back(p->value);
  return out;
}

bool same(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

AlgoConfig small_config() {
  AlgoConfig c;
  c.hidden = 8;
  c.history = 3;
  c.batch_size = 4;
  return c;
}

}  // namespace

TEST_CASE("history construction") {
  const int d = 3;
  const auto eps = numbered_episode(60, d);
  const auto h0 = make_history(eps, 0, 10, d);
  REQUIRE(h0.size() == 10);
  for (const auto& o : h0) CHECK(o.isZero());

  const auto h5 = make_history(eps, 5, 10, d);
  for (int k = 0; k < 5; ++k) CHECK(h5[k].isZero());
  for (int k = 0; k < 5; ++k) CHECK(h5[5 + k] == eps[k]);

  const auto h50 = make_history(eps, 50, 10, d);
  for (int k = 0; k < 10; ++k) CHECK(h50[k] == eps[40 + k]);

  CHECK_THROWS(make_history(eps, -1, 10, d));
}

TEST_CASE("twin-min and soft targets") {
  const Matrix r = Matrix::Constant(1, 1, -1.0);
  const Matrix zero = Matrix::Zero(1, 1);
  const Matrix one = Matrix::Ones(1, 1);
  CHECK(twin_min_target(r, zero, Matrix::Constant(1, 1, 2.0), one, 0.99)(0, 0) ==
        doctest::Approx(-0.01));
  CHECK(twin_min_target(r, one, Matrix::Constant(1, 1, 2.0), one, 0.99)(0, 0) == -1.0);
  // alpha = 0 reduces the soft target to the twin-min target
  CHECK(soft_target(r, zero, Matrix::Constant(1, 1, 2.0), one, Matrix::Constant(1, 1, 5.0), 0.0, 0.99)(0, 0) ==
        doctest::Approx(-0.01));
  CHECK(soft_target(r, zero, one, one, Matrix::Constant(1, 1, -2.0), 0.5, 0.5)(0, 0) ==
        doctest::Approx(-1.0 + 0.5 * (1.0 + 1.0)));
}

TEST_CASE("noise and action clipping") {
  CHECK(clip_noise(0.9, 0.5) == 0.5);
  CHECK(clip_noise(-0.9, 0.5) == -0.5);
  CHECK(clip_noise(0.1, 0.5) == 0.1);
  CHECK(explore_action(0.98, 0.5) == 1.0);
  CHECK(explore_action(-0.98, -0.5) == -1.0);
}

TEST_CASE("polyak update") {
  Rng rng(1);
  nn::Dense a(3, 2, nn::Activation::relu, rng), b(3, 2, nn::Activation::relu, rng);
  std::vector<nn::Param*> pa, pb;
  a.collect(pa);
  b.collect(pb);
  for (auto* p : pa) p->value.setZero();
  for (auto* p : pb) p->value.setOnes();
  nn::polyak_update(pa, pb, 0.005);
  for (auto* p : pa) CHECK(p->value.isApproxToConstant(0.005));
  const auto before = snapshot(pa);
  nn::polyak_update(pa, pb, 0.0);
  CHECK(same(before, snapshot(pa)));
  nn::polyak_update(pa, pb, 1.0);
  for (auto* p : pa) CHECK(p->value.isOnes());

  nn::Dense c(2, 2, nn::Activation::relu, rng);
  std::vector<nn::Param*> pc;
  c.collect(pc);
  CHECK_THROWS(nn::polyak_update(pa, pc, 0.5));
}

TEST_CASE("recurrent network gradients match central finite differences") {
  Rng rng(11);
  const int d = 3, hidden = 4, l = 3;
  const long B = 2;
  RecurrentNet net(d, d + 1, hidden, 2, rng, "mini");
  const auto hist = random_sequence(l, d, B, rng);
  const Matrix cur = random_matrix(d + 1, B, rng);
  const Matrix w = random_matrix(2, B, rng);

  auto params = net.params();
  nn::zero_grad(params);
  net.forward(hist, cur);
  const Matrix dx = net.backward(w);
  std::vector<Matrix> analytic;
  for (auto* p : params) analytic.push_back(p->grad);

  auto loss = [&] { return (net.infer(hist, cur).array() * w.array()).sum(); };
  const auto numeric = oracle::finite_difference(params, loss);
  CHECK(oracle::max_relative_error(analytic, numeric) <= 1e-4);

  // input gradient through the CFE
  Matrix cur_fd = cur;
  Matrix num_dx(dx.rows(), dx.cols());
  for (long i = 0; i < cur.size(); ++i) {
    const double keep = cur_fd.data()[i];
    cur_fd.data()[i] = keep + 1e-6;
    const double up = (net.infer(hist, cur_fd).array() * w.array()).sum();
    cur_fd.data()[i] = keep - 1e-6;
    const double down = (net.infer(hist, cur_fd).array() * w.array()).sum();
    cur_fd.data()[i] = keep;
    num_dx.data()[i] = (up - down) / 2e-6;
  }
  CHECK(oracle::max_relative_error({dx}, {num_dx}) <= 1e-4);
}

TEST_CASE("forward and infer agree") {
  Rng rng(3);
  RecurrentNet net(5, 5, 6, 1, rng, "n");
  const auto hist = random_sequence(4, 5, 3, rng);
  const Matrix cur = random_matrix(5, 3, rng);
  CHECK(net.forward(hist, cur).isApprox(net.infer(hist, cur)));
}

TEST_CASE("replay buffer rebuilds the shifted history") {
  const int d = 2, l = 3;
  ReplayBuffer buf(4, d, l);
  const auto eps = numbered_episode(10, d);
  for (int t = 0; t < 6; ++t) {
    Transition tr;
    tr.history = make_history(eps, t, l, d);
    tr.observation = eps[t];
    tr.next_observation = eps[t + 1];
    tr.action = 0.1 * t;
    tr.reward = -t;
    buf.add(tr);
  }
  CHECK(buf.size() == 4);
  for (long i = 0; i < buf.size(); ++i) {
    const Transition t = buf.get(i);
    REQUIRE(t.next_history.size() == static_cast<std::size_t>(l));
    for (int k = 0; k + 1 < l; ++k) CHECK(t.next_history[k] == t.history[k + 1]);
    CHECK(t.next_history.back() == t.observation);
  }
  // ring: slot 0 now holds t = 4
  CHECK(buf.get(0).observation == eps[4]);

  Rng rng(2);
  const Batch b = buf.sample(3, rng);
  for (long c = 0; c < b.size(); ++c) {
    for (int k = 0; k + 1 < l; ++k) CHECK(b.next_history[k].col(c) == b.history[k + 1].col(c));
    CHECK(b.next_history.back().col(c) == b.observation.col(c));
  }
}

TEST_CASE("TD3 policy delay and soft updates") {
  Rng rng(4);
  const int d = 5;
  Td3Agent agent(d, small_config(), 9);
  const auto actor0 = snapshot(agent.actor().params());
  const auto critic0 = snapshot(agent.critic1().params());
  const auto target0 = snapshot(agent.critic1_target().params());
  const auto actor_t0 = snapshot(agent.actor_target().params());
  const Batch b = random_batch(d, 3, 4, rng);

  const UpdateStats s1 = agent.update(b);
  CHECK_FALSE(s1.actor_updated);
  CHECK(same(actor0, snapshot(agent.actor().params())));
  CHECK_FALSE(same(critic0, snapshot(agent.critic1().params())));
  CHECK(same(target0, snapshot(agent.critic1_target().params())));

  const UpdateStats s2 = agent.update(b);
  CHECK(s2.actor_updated);
  CHECK_FALSE(same(actor0, snapshot(agent.actor().params())));

  // target moved by exactly tau toward the online critic
  const auto online = snapshot(agent.critic1().params());
  const auto target = snapshot(agent.critic1_target().params());
  for (std::size_t i = 0; i < target.size(); ++i)
    CHECK(target[i].isApprox(0.995 * target0[i] + 0.005 * online[i], 1e-12));
  const auto actor_t = snapshot(agent.actor_target().params());
  const auto actor_now = snapshot(agent.actor().params());
  for (std::size_t i = 0; i < actor_t.size(); ++i)
    CHECK(actor_t[i].isApprox(0.995 * actor_t0[i] + 0.005 * actor_now[i], 1e-12));
}

TEST_CASE("TD3 actions are bounded and deterministic without exploration") {
  Rng rng(5);
  const int d = 4;
  Td3Agent agent(d, small_config(), 1);
  const auto eps = numbered_episode(5, d);
  const auto h = make_history(eps, 3, 3, d);
  const double a1 = agent.act(eps[3], h, false);
  CHECK(agent.act(eps[3], h, false) == a1);
  for (int i = 0; i < 200; ++i) {
    const double a = agent.act(Observation(random_matrix(d, 1, rng)) * 50.0, h, true);
    CHECK(a >= -1.0);
    CHECK(a <= 1.0);
  }
}

TEST_CASE("SAC temperature stays positive and rises when entropy is low") {
  const AlgoConfig cfg = small_config();
  SacAgent agent(4, cfg, 2);
  CHECK(agent.alpha() == doctest::Approx(0.2));
  const double before = agent.alpha();
  // low entropy means high log-probability: logp = 3 > -target_entropy
  const double grad = agent.update_temperature(Matrix::Constant(1, 8, 3.0));
  CHECK(grad < 0.0);
  CHECK(agent.alpha() > before);
  const double mid = agent.alpha();
  agent.update_temperature(Matrix::Constant(1, 8, -5.0));
  CHECK(agent.alpha() < mid);
  CHECK(agent.alpha() > 0.0);

  Rng rng(6);
  const Batch b = random_batch(4, 3, 4, rng);
  for (int i = 0; i < 20; ++i) CHECK(agent.update(b).alpha > 0.0);
}

TEST_CASE("SAC squashed sample and log-probability") {
  SacAgent agent(3, small_config(), 3);
  Rng rng(7);
  Matrix head(2, 500);
  head.row(0).setConstant(0.3);
  head.row(1).setConstant(std::log(0.5));
  const auto s = agent.sample(head, rng);
  for (long i = 0; i < s.action.cols(); ++i) {
    CHECK(std::abs(s.action(0, i)) < 1.0);
    const double u = 0.3 + 0.5 * s.eps(0, i);
    const double gauss = -0.5 * s.eps(0, i) * s.eps(0, i) - std::log(0.5) - 0.5 * std::log(2 * M_PI);
    CHECK(s.logp(0, i) == doctest::Approx(gauss - std::log(1 - std::tanh(u) * std::tanh(u) + 1e-6)));
  }
  Matrix wide(2, 1);
  wide << 0.0, 10.0;
  const auto c = agent.sample(wide, rng);
  CHECK(c.log_std(0, 0) == 2.0);
  CHECK(c.clamped(0, 0) == 1.0);
}

TEST_CASE("agent checkpoints round trip") {
  Rng rng(8);
  const int d = 4;
  const auto dir = std::filesystem::temp_directory_path() / "doa_rl_test";
  std::filesystem::create_directories(dir);
  const Batch b = random_batch(d, 3, 4, rng);
  for (Algorithm algo : {Algorithm::td3, Algorithm::sac}) {
    auto agent = make_agent(algo, d, small_config(), 5);
    agent->update(b);
    agent->update(b);
    const auto path = dir / (std::string(to_string(algo)) + ".ckpt");
    agent->save(path);
    auto back = load_agent(path);
    CHECK(back->algorithm() == algo);
    CHECK(back->update_calls() == 2);
    const auto eps = numbered_episode(4, d);
    const auto h = make_history(eps, 3, 3, d);
    CHECK(back->act(eps[3], h, false) == agent->act(eps[3], h, false));
    // the restored agent continues identically
    agent->update(b);
    back->update(b);
    CHECK(back->act(eps[3], h, false) == agent->act(eps[3], h, false));
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("config validation") {
  AlgoConfig c;
  CHECK_NOTHROW(c.validate());
  c.gamma = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = AlgoConfig{};
  c.initial_temperature = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(algorithm_from_string("ppo"), ConfigError);
}
