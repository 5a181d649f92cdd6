#pragma once

// Small dense/LSTM building blocks with explicit backpropagation. Activations
// are stored column-wise: a batch of B inputs of width n is an n x B matrix.

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "doa/common.hpp"

namespace doa::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Sequence = std::vector<Matrix>;  ///< one n x B matrix per time step, oldest first

struct Param {
  std::string name;
  Matrix value;
  Matrix grad;

  Param() = default;
  Param(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)) {
    grad = Matrix::Zero(value.rows(), value.cols());
  }
};

enum class Activation { identity, relu, tanh };

class Dense {
 public:
  Dense() = default;
  Dense(int in, int out, Activation act, Rng& rng, const std::string& name = "dense");

  int in_features() const { return static_cast<int>(w_.value.cols()); }
  int out_features() const { return static_cast<int>(w_.value.rows()); }

  /// Training forward pass; caches what backward() needs.
  Matrix forward(const Matrix& x);
  Matrix infer(const Matrix& x) const;
  /// Accumulates parameter gradients and returns the gradient w.r.t. the input.
  Matrix backward(const Matrix& dy);

  void collect(std::vector<Param*>& out) { out.push_back(&w_); out.push_back(&b_); }

 private:
  Param w_, b_;
  Activation act_ = Activation::identity;
  Matrix x_, y_;
};

/// Single-layer LSTM returning the final hidden state. Gate order i, f, g, o.
class Lstm {
 public:
  Lstm() = default;
  Lstm(int in, int hidden, Rng& rng, const std::string& name = "lstm");

  int input_size() const { return static_cast<int>(wx_.value.cols()); }
  int hidden_size() const { return static_cast<int>(wh_.value.cols()); }

  Matrix forward(std::span<const Matrix> seq);
  Matrix infer(std::span<const Matrix> seq) const;
  void backward(const Matrix& dh_last);

  void collect(std::vector<Param*>& out) {
    out.push_back(&wx_);
    out.push_back(&wh_);
    out.push_back(&b_);
  }

 private:
  Param wx_, wh_, b_;
  // cache of the last forward pass
  int steps_ = 0;
  long batch_ = 0;
  Matrix x_all_;      // in x (T*B)
  Matrix gates_all_;  // 4H x (T*B), activated
  Matrix c_all_;      // H x ((T+1)*B), c_{-1} = 0 in the first block
  Matrix h_all_;      // H x ((T+1)*B)
};

/// Adam with bias correction; holds raw pointers into parameters owned by a
/// network, so the network must outlive the optimizer and must not move.
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Param*> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);

  void zero_grad();
  void step();
  double learning_rate() const { return lr_; }
  long steps_taken() const { return t_; }

  nlohmann::json state() const;
  void load_state(const nlohmann::json& j);

 private:
  std::vector<Param*> params_;
  std::vector<Matrix> m_, v_;
  double lr_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  long t_ = 0;
};

void zero_grad(std::span<Param* const> params);
/// target <- (1 - tau) * target + tau * online
void polyak_update(std::span<Param* const> target, std::span<Param* const> online, double tau);
bool all_finite(std::span<Param* const> params);
long parameter_count(std::span<Param* const> params);

nlohmann::json params_to_json(std::span<Param* const> params);
void params_from_json(std::span<Param* const> params, const nlohmann::json& j);

Matrix matrix_from_json(const nlohmann::json& j);
nlohmann::json matrix_to_json(const Matrix& m);

}  // namespace doa::nn
