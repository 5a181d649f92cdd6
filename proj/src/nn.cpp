#include "doa/nn.hpp"

#include <cmath>

namespace doa::nn {
namespace {

Matrix uniform_matrix(long rows, long cols, double bound, Rng& rng) {
  Matrix m(rows, cols);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (long j = 0; j < cols; ++j)
    for (long i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

void apply_activation(Matrix& y, Activation act) {
  switch (act) {
    case Activation::identity: break;
    case Activation::relu: y = y.cwiseMax(0.0); break;
    case Activation::tanh: y = y.array().tanh().matrix(); break;
  }
}

}  // namespace

Dense::Dense(int in, int out, Activation act, Rng& rng, const std::string& name) : act_(act) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  w_ = Param(name + ".w", uniform_matrix(out, in, bound, rng));
  b_ = Param(name + ".b", uniform_matrix(out, 1, bound, rng));
}

Matrix Dense::infer(const Matrix& x) const {
  Matrix y = w_.value * x;
  y.colwise() += b_.value.col(0);
  apply_activation(y, act_);
  return y;
}

Matrix Dense::forward(const Matrix& x) {
  x_ = x;
  y_ = infer(x);
  return y_;
}

Matrix Dense::backward(const Matrix& dy) {
  Matrix dz;
  switch (act_) {
    case Activation::identity: dz = dy; break;
    case Activation::relu: dz = (y_.array() > 0.0).select(dy, 0.0); break;
    case Activation::tanh: dz = (dy.array() * (1.0 - y_.array().square())).matrix(); break;
  }
  w_.grad.noalias() += dz * x_.transpose();
  b_.grad += dz.rowwise().sum();
  return w_.value.transpose() * dz;
}

Lstm::Lstm(int in, int hidden, Rng& rng, const std::string& name) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  wx_ = Param(name + ".wx", uniform_matrix(4L * hidden, in, bound, rng));
  wh_ = Param(name + ".wh", uniform_matrix(4L * hidden, hidden, bound, rng));
  Matrix b = uniform_matrix(4L * hidden, 1, bound, rng);
  b.block(hidden, 0, hidden, 1).array() += 1.0;  // forget-gate bias
  b_ = Param(name + ".b", std::move(b));
}

namespace {

// Vectorized logistic and tanh; Eigen only vectorizes exp for doubles.
template <typename Derived>
auto sigmoid_array(const Eigen::ArrayBase<Derived>& x) {
  return 1.0 / (1.0 + (-x).exp());
}

template <typename Derived>
auto tanh_array(const Eigen::ArrayBase<Derived>& x) {
  return 2.0 / (1.0 + (-2.0 * x).exp()) - 1.0;
}

// Activates a 4H x B block of pre-activations in place (i, f, o sigmoid; g tanh).
template <typename Block>
void activate_gates(Block z, long H) {
  z.topRows(2 * H).array() = sigmoid_array(z.topRows(2 * H).array()).eval();
  z.middleRows(2 * H, H).array() = tanh_array(z.middleRows(2 * H, H).array()).eval();
  z.bottomRows(H).array() = sigmoid_array(z.bottomRows(H).array()).eval();
}

}  // namespace

Matrix Lstm::infer(std::span<const Matrix> seq) const {
  const long H = hidden_size();
  const long B = seq.empty() ? 0 : seq.front().cols();
  Matrix h = Matrix::Zero(H, B), c = Matrix::Zero(H, B), z(4 * H, B);
  for (const Matrix& x : seq) {
    z.noalias() = wx_.value * x;
    z.noalias() += wh_.value * h;
    z.colwise() += b_.value.col(0);
    activate_gates(z.leftCols(B), H);
    c.array() = z.middleRows(H, H).array() * c.array() + z.topRows(H).array() * z.middleRows(2 * H, H).array();
    h.array() = z.bottomRows(H).array() * tanh_array(c.array());
  }
  return h;
}

Matrix Lstm::forward(std::span<const Matrix> seq) {
  const long H = hidden_size();
  const long in = input_size();
  steps_ = static_cast<int>(seq.size());
  batch_ = seq.empty() ? 0 : seq.front().cols();
  const long B = batch_;
  const long T = steps_;

  x_all_.resize(in, T * B);
  for (long t = 0; t < T; ++t) x_all_.middleCols(t * B, B) = seq[t];

  gates_all_.noalias() = wx_.value * x_all_;
  gates_all_.colwise() += b_.value.col(0);
  c_all_ = Matrix::Zero(H, (T + 1) * B);
  h_all_ = Matrix::Zero(H, (T + 1) * B);

  for (long t = 0; t < T; ++t) {
    auto z = gates_all_.middleCols(t * B, B);
    z.noalias() += wh_.value * h_all_.middleCols(t * B, B);
    activate_gates(z, H);
    // columns t*B.. hold c_{t-1}, h_{t-1}; columns (t+1)*B.. receive c_t, h_t
    c_all_.middleCols((t + 1) * B, B).array() =
        z.middleRows(H, H).array() * c_all_.middleCols(t * B, B).array() +
        z.topRows(H).array() * z.middleRows(2 * H, H).array();
    h_all_.middleCols((t + 1) * B, B).array() =
        z.bottomRows(H).array() * tanh_array(c_all_.middleCols((t + 1) * B, B).array());
  }
  return h_all_.middleCols(T * B, B);
}

void Lstm::backward(const Matrix& dh_last) {
  const long H = hidden_size();
  const long B = batch_;
  const long T = steps_;
  Matrix da_all(4 * H, T * B);
  Matrix dh = dh_last;
  Matrix dc = Matrix::Zero(H, B);
  Eigen::ArrayXXd tc(H, B), dck(H, B);

  for (long t = T - 1; t >= 0; --t) {
    const auto g = gates_all_.middleCols(t * B, B).array();
    const auto ig = g.topRows(H);
    const auto fg = g.middleRows(H, H);
    const auto gg = g.middleRows(2 * H, H);
    const auto og = g.bottomRows(H);
    auto da = da_all.middleCols(t * B, B).array();
    tc = tanh_array(c_all_.middleCols((t + 1) * B, B).array());
    dck = dc.array() + dh.array() * og * (1.0 - tc.square());
    da.topRows(H) = dck * gg * ig * (1.0 - ig);
    da.middleRows(H, H) = dck * c_all_.middleCols(t * B, B).array() * fg * (1.0 - fg);
    da.middleRows(2 * H, H) = dck * ig * (1.0 - gg.square());
    da.bottomRows(H) = dh.array() * tc * og * (1.0 - og);
    dc.array() = dck * fg;
    if (t > 0) dh.noalias() = wh_.value.transpose() * da_all.middleCols(t * B, B);
  }
  wx_.grad.noalias() += da_all * x_all_.transpose();
  wh_.grad.noalias() += da_all * h_all_.leftCols(T * B).transpose();
  b_.grad += da_all.rowwise().sum();
}

Adam::Adam(std::vector<Param*> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const Param* p : params_) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::zero_grad() { nn::zero_grad(params_); }

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const double step_size = lr_ * std::sqrt(c2) / c1;
  const double eps_hat = eps_ * std::sqrt(c2);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Param& p = *params_[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= step_size * m_[i].array() / (v_[i].array().sqrt() + eps_hat);
  }
}

nlohmann::json Adam::state() const {
  nlohmann::json j;
  j["t"] = t_;
  j["lr"] = lr_;
  j["m"] = nlohmann::json::array();
  j["v"] = nlohmann::json::array();
  for (std::size_t i = 0; i < m_.size(); ++i) {
    j["m"].push_back(matrix_to_json(m_[i]));
    j["v"].push_back(matrix_to_json(v_[i]));
  }
  return j;
}

void Adam::load_state(const nlohmann::json& j) {
  if (j.at("m").size() != m_.size()) throw ConfigError("optimizer state does not match network");
  t_ = j.at("t").get<long>();
  for (std::size_t i = 0; i < m_.size(); ++i) {
    m_[i] = matrix_from_json(j["m"][i]);
    v_[i] = matrix_from_json(j["v"][i]);
  }
}

void zero_grad(std::span<Param* const> params) {
  for (Param* p : params) p->grad.setZero();
}

void polyak_update(std::span<Param* const> target, std::span<Param* const> online, double tau) {
  if (target.size() != online.size()) throw ConfigError("polyak_update: parameter count mismatch");
  for (std::size_t i = 0; i < target.size(); ++i) {
    Matrix& t = target[i]->value;
    const Matrix& o = online[i]->value;
    if (t.rows() != o.rows() || t.cols() != o.cols())
      throw ConfigError("polyak_update: shape mismatch for " + target[i]->name);
    t = (1.0 - tau) * t + tau * o;
  }
}

bool all_finite(std::span<Param* const> params) {
  for (const Param* p : params)
    if (!p->value.allFinite()) return false;
  return true;
}

long parameter_count(std::span<Param* const> params) {
  long n = 0;
  for (const Param* p : params) n += p->value.size();
  return n;
}

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  j["data"] = std::vector<double>(m.data(), m.data() + m.size());
  return j;
}

Matrix matrix_from_json(const nlohmann::json& j) {
  const long rows = j.at("rows").get<long>();
  const long cols = j.at("cols").get<long>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<long>(data.size()) != rows * cols) throw ConfigError("matrix size mismatch");
  return Eigen::Map<const Matrix>(data.data(), rows, cols);
}

nlohmann::json params_to_json(std::span<Param* const> params) {
  nlohmann::json j = nlohmann::json::object();
  for (const Param* p : params) j[p->name] = matrix_to_json(p->value);
  return j;
}

void params_from_json(std::span<Param* const> params, const nlohmann::json& j) {
  for (Param* p : params) {
    if (!j.contains(p->name)) throw ConfigError("checkpoint lacks parameter " + p->name);
    Matrix m = matrix_from_json(j.at(p->name));
    if (m.rows() != p->value.rows() || m.cols() != p->value.cols())
      throw ConfigError("checkpoint shape mismatch for " + p->name);
    p->value = std::move(m);
  }
}

}  // namespace doa::nn
