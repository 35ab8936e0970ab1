#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace xrcast::nn {

using Matrix = Eigen::MatrixXd;

struct Parameter {
  std::string name;
  Matrix value;
};

/// Reverse-mode differentiation over dense matrices. A tape records one
/// forward pass; `backward` then pushes adjoints to the parameter gradient
/// buffers handed to the constructor. A tape built without gradient buffers
/// records no backward closures (inference).
class Tape {
 public:
  using Var = std::size_t;

  Tape() = default;
  explicit Tape(std::vector<Matrix>* param_grads) : param_grads_(param_grads) {}

  Var constant(Matrix value);
  Var param(const Parameter& p, std::size_t id);

  Var matmul(Var a, Var b);
  /// a * b^T
  Var matmul_nt(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  /// Adds a 1 x n row to every row of a.
  Var add_row(Var a, Var row);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var relu(Var a);
  Var softmax_rows(Var a);
  /// Row-wise normalisation, scaled by gamma and shifted by beta (both 1 x n).
  Var layer_norm_rows(Var a, Var gamma, Var beta, double eps = 1e-5);
  Var block(Var a, Eigen::Index row, Eigen::Index col, Eigen::Index rows, Eigen::Index cols);
  Var hconcat(const std::vector<Var>& parts);
  Var vconcat(const std::vector<Var>& parts);
  /// Mean squared error against a constant target of the same shape (1 x 1).
  Var mse(Var prediction, const Matrix& target);

  const Matrix& value(Var v) const { return nodes_[v].value; }
  void backward(Var loss);

  bool recording() const { return param_grads_ != nullptr; }
  /// Scalar multiply-adds performed by matrix products, forward and backward.
  std::uint64_t multiply_adds() const { return multiply_adds_; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void()> back;
    bool needs_grad = false;
  };

  Var push(Matrix value, bool needs_grad);
  Matrix& grad(Var v);
  bool needs(Var v) const { return nodes_[v].needs_grad; }
  template <typename Back>
  void on_backward(Var out, Back back);

  std::vector<Matrix>* param_grads_ = nullptr;
  std::vector<Node> nodes_;
  std::uint64_t multiply_adds_ = 0;
};

}  // namespace xrcast::nn
