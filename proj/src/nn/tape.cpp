#include "xrcast/nn/tape.hpp"

#include <cassert>
#include <cmath>

namespace xrcast::nn {

Tape::Var Tape::push(Matrix value, bool needs_grad) {
  nodes_.push_back(Node{std::move(value), Matrix(), nullptr, needs_grad && recording()});
  return nodes_.size() - 1;
}

Matrix& Tape::grad(Var v) {
  Node& n = nodes_[v];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

template <typename Back>
void Tape::on_backward(Var out, Back back) {
  if (nodes_[out].needs_grad) nodes_[out].back = std::move(back);
}

Tape::Var Tape::constant(Matrix value) { return push(std::move(value), false); }

Tape::Var Tape::param(const Parameter& p, std::size_t id) {
  const Var out = push(p.value, true);
  on_backward(out, [this, out, id] { (*param_grads_)[id] += nodes_[out].grad; });
  return out;
}

Tape::Var Tape::matmul(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  assert(A.cols() == B.rows());
  multiply_adds_ += static_cast<std::uint64_t>(A.rows() * A.cols() * B.cols());
  const Var out = push(A * B, needs(a) || needs(b));
  on_backward(out, [this, a, b, out] {
    const Matrix& g = nodes_[out].grad;
    const auto work = static_cast<std::uint64_t>(g.rows() * g.cols() * value(a).cols());
    if (needs(a)) {
      grad(a).noalias() += g * value(b).transpose();
      multiply_adds_ += work;
    }
    if (needs(b)) {
      grad(b).noalias() += value(a).transpose() * g;
      multiply_adds_ += work;
    }
  });
  return out;
}

Tape::Var Tape::matmul_nt(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  assert(A.cols() == B.cols());
  multiply_adds_ += static_cast<std::uint64_t>(A.rows() * A.cols() * B.rows());
  const Var out = push(A * B.transpose(), needs(a) || needs(b));
  on_backward(out, [this, a, b, out] {
    const Matrix& g = nodes_[out].grad;
    const auto work = static_cast<std::uint64_t>(g.rows() * g.cols() * value(a).cols());
    if (needs(a)) {
      grad(a).noalias() += g * value(b);
      multiply_adds_ += work;
    }
    if (needs(b)) {
      grad(b).noalias() += g.transpose() * value(a);
      multiply_adds_ += work;
    }
  });
  return out;
}

Tape::Var Tape::add(Var a, Var b) {
  const Var out = push(value(a) + value(b), needs(a) || needs(b));
  on_backward(out, [this, a, b, out] {
    if (needs(a)) grad(a) += nodes_[out].grad;
    if (needs(b)) grad(b) += nodes_[out].grad;
  });
  return out;
}

Tape::Var Tape::sub(Var a, Var b) {
  const Var out = push(value(a) - value(b), needs(a) || needs(b));
  on_backward(out, [this, a, b, out] {
    if (needs(a)) grad(a) += nodes_[out].grad;
    if (needs(b)) grad(b) -= nodes_[out].grad;
  });
  return out;
}

Tape::Var Tape::mul(Var a, Var b) {
  const Var out = push(value(a).cwiseProduct(value(b)), needs(a) || needs(b));
  on_backward(out, [this, a, b, out] {
    const Matrix& g = nodes_[out].grad;
    if (needs(a)) grad(a) += g.cwiseProduct(value(b));
    if (needs(b)) grad(b) += g.cwiseProduct(value(a));
  });
  return out;
}

Tape::Var Tape::scale(Var a, double s) {
  const Var out = push(value(a) * s, needs(a));
  on_backward(out, [this, a, s, out] { grad(a) += nodes_[out].grad * s; });
  return out;
}

Tape::Var Tape::add_row(Var a, Var row) {
  assert(value(row).rows() == 1 && value(row).cols() == value(a).cols());
  Matrix v = value(a);
  v.rowwise() += value(row).row(0);
  const Var out = push(std::move(v), needs(a) || needs(row));
  on_backward(out, [this, a, row, out] {
    const Matrix& g = nodes_[out].grad;
    if (needs(a)) grad(a) += g;
    if (needs(row)) grad(row) += g.colwise().sum();
  });
  return out;
}

Tape::Var Tape::sigmoid(Var a) {
  Matrix y = value(a).unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  const Var out = push(std::move(y), needs(a));
  on_backward(out, [this, a, out] {
    const Matrix& y = value(out);
    grad(a).array() += nodes_[out].grad.array() * y.array() * (1.0 - y.array());
  });
  return out;
}

Tape::Var Tape::tanh(Var a) {
  const Var out = push(value(a).array().tanh().matrix(), needs(a));
  on_backward(out, [this, a, out] {
    const Matrix& y = value(out);
    grad(a).array() += nodes_[out].grad.array() * (1.0 - y.array().square());
  });
  return out;
}

Tape::Var Tape::relu(Var a) {
  const Var out = push(value(a).cwiseMax(0.0), needs(a));
  on_backward(out, [this, a, out] {
    grad(a).array() += (value(a).array() > 0.0).select(nodes_[out].grad.array(), 0.0);
  });
  return out;
}

Tape::Var Tape::softmax_rows(Var a) {
  const Matrix& x = value(a);
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - m).exp().matrix();
    y.row(r) /= y.row(r).sum();
  }
  const Var out = push(std::move(y), needs(a));
  on_backward(out, [this, a, out] {
    const Matrix& y = value(out);
    const Matrix& g = nodes_[out].grad;
    const Eigen::VectorXd dot = g.cwiseProduct(y).rowwise().sum();
    Matrix& ga = grad(a);
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      ga.row(r).array() += y.row(r).array() * (g.row(r).array() - dot(r));
    }
  });
  return out;
}

Tape::Var Tape::layer_norm_rows(Var a, Var gamma, Var beta, double eps) {
  const Matrix& x = value(a);
  const Eigen::Index n = x.cols();
  Matrix xhat(x.rows(), n);
  Eigen::VectorXd inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (x.row(r).array() - mean) * inv_std(r);
  }
  Matrix y = xhat.array().rowwise() * value(gamma).row(0).array();
  y.rowwise() += value(beta).row(0);
  const Var out = push(std::move(y), needs(a) || needs(gamma) || needs(beta));
  on_backward(out, [this, a, gamma, beta, out, xhat = std::move(xhat), inv_std = std::move(inv_std)] {
    const Matrix& g = nodes_[out].grad;
    if (needs(gamma)) grad(gamma) += g.cwiseProduct(xhat).colwise().sum();
    if (needs(beta)) grad(beta) += g.colwise().sum();
    if (needs(a)) {
      const Matrix dxhat = g.array().rowwise() * value(gamma).row(0).array();
      Matrix& ga = grad(a);
      for (Eigen::Index r = 0; r < g.rows(); ++r) {
        const double m1 = dxhat.row(r).mean();
        const double m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
        ga.row(r).array() += inv_std(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
      }
    }
  });
  return out;
}

Tape::Var Tape::block(Var a, Eigen::Index row, Eigen::Index col, Eigen::Index rows, Eigen::Index cols) {
  const Var out = push(value(a).block(row, col, rows, cols), needs(a));
  on_backward(out, [this, a, row, col, rows, cols, out] {
    grad(a).block(row, col, rows, cols) += nodes_[out].grad;
  });
  return out;
}

Tape::Var Tape::hconcat(const std::vector<Var>& parts) {
  assert(!parts.empty());
  Eigen::Index cols = 0;
  bool any = false;
  for (Var p : parts) {
    cols += value(p).cols();
    any = any || needs(p);
  }
  Matrix v(value(parts.front()).rows(), cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    v.middleCols(at, value(p).cols()) = value(p);
    at += value(p).cols();
  }
  const Var out = push(std::move(v), any);
  on_backward(out, [this, parts, out] {
    Eigen::Index at = 0;
    for (Var p : parts) {
      const Eigen::Index c = value(p).cols();
      if (needs(p)) grad(p) += nodes_[out].grad.middleCols(at, c);
      at += c;
    }
  });
  return out;
}

Tape::Var Tape::vconcat(const std::vector<Var>& parts) {
  assert(!parts.empty());
  Eigen::Index rows = 0;
  bool any = false;
  for (Var p : parts) {
    rows += value(p).rows();
    any = any || needs(p);
  }
  Matrix v(rows, value(parts.front()).cols());
  Eigen::Index at = 0;
  for (Var p : parts) {
    v.middleRows(at, value(p).rows()) = value(p);
    at += value(p).rows();
  }
  const Var out = push(std::move(v), any);
  on_backward(out, [this, parts, out] {
    Eigen::Index at = 0;
    for (Var p : parts) {
      const Eigen::Index r = value(p).rows();
      if (needs(p)) grad(p) += nodes_[out].grad.middleRows(at, r);
      at += r;
    }
  });
  return out;
}

Tape::Var Tape::mse(Var prediction, const Matrix& target) {
  const Matrix diff = value(prediction) - target;
  const double n = static_cast<double>(diff.size());
  Matrix loss(1, 1);
  loss(0, 0) = diff.squaredNorm() / n;
  const Var out = push(std::move(loss), needs(prediction));
  on_backward(out, [this, prediction, out, diff, n] {
    grad(prediction) += diff * (2.0 * nodes_[out].grad(0, 0) / n);
  });
  return out;
}

void Tape::backward(Var loss) {
  assert(value(loss).size() == 1);
  if (!nodes_[loss].needs_grad) return;
  grad(loss)(0, 0) += 1.0;
  for (Var i = loss + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.back && n.grad.size() != 0) n.back();
  }
}

}  // namespace xrcast::nn
