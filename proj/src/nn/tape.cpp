#include "apr/nn/tape.hpp"

#include <cmath>

#include "apr/common/errors.hpp"

namespace apr::nn {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

void check(bool ok, const char* what) {
  if (!ok) throw RuntimeFailure(std::string("tape: ") + what);
}

}  // namespace

Var Tape::push(Matrix value, std::function<void()> backward) {
  Node n;
  n.value = std::move(value);
  if (record_) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const Matrix& Tape::val(int id) const {
  const Node& n = nodes_[id];
  return n.param ? n.param->value : n.value;
}

const Matrix& Tape::value(Var v) const {
  check(v.id >= 0 && static_cast<std::size_t>(v.id) < nodes_.size(), "invalid variable");
  return val(v.id);
}

Matrix& Tape::grad(int id) {
  Node& n = nodes_[id];
  if (n.param) return n.param->grad;
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Var Tape::param(Parameter& p) {
  Node n;
  n.param = &p;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Matrix m) { return push(std::move(m)); }

Var Tape::matmul(Var a, Var b) {
  check(val(a.id).cols() == val(b.id).rows(), "matmul shape mismatch");
  Matrix out = val(a.id) * val(b.id);
  return push(std::move(out), [this, a, b, o = static_cast<int>(nodes_.size())] {
    const Matrix& g = nodes_[o].grad;
    grad(a.id).noalias() += g * val(b.id).transpose();
    grad(b.id).noalias() += val(a.id).transpose() * g;
  });
}

Var Tape::matmul_nt(Var a, Var b) {
  check(val(a.id).cols() == val(b.id).cols(), "matmul_nt shape mismatch");
  Matrix out = val(a.id) * val(b.id).transpose();
  return push(std::move(out), [this, a, b, o = static_cast<int>(nodes_.size())] {
    const Matrix& g = nodes_[o].grad;
    grad(a.id).noalias() += g * val(b.id);
    grad(b.id).noalias() += g.transpose() * val(a.id);
  });
}

Var Tape::add(Var a, Var b) {
  check(val(a.id).rows() == val(b.id).rows() && val(a.id).cols() == val(b.id).cols(), "add shape mismatch");
  Matrix out = val(a.id) + val(b.id);
  return push(std::move(out), [this, a, b, o = static_cast<int>(nodes_.size())] {
    const Matrix& g = nodes_[o].grad;
    grad(a.id) += g;
    grad(b.id) += g;
  });
}

Var Tape::add_row(Var a, Var row) {
  check(val(row.id).rows() == 1 && val(row.id).cols() == val(a.id).cols(), "add_row shape mismatch");
  Matrix out = val(a.id).rowwise() + val(row.id).row(0);
  return push(std::move(out), [this, a, row, o = static_cast<int>(nodes_.size())] {
    const Matrix& g = nodes_[o].grad;
    grad(a.id) += g;
    grad(row.id) += g.colwise().sum();
  });
}

Var Tape::mul(Var a, Var b) {
  check(val(a.id).rows() == val(b.id).rows() && val(a.id).cols() == val(b.id).cols(), "mul shape mismatch");
  Matrix out = val(a.id).cwiseProduct(val(b.id));
  return push(std::move(out), [this, a, b, o = static_cast<int>(nodes_.size())] {
    const Matrix& g = nodes_[o].grad;
    grad(a.id) += g.cwiseProduct(val(b.id));
    grad(b.id) += g.cwiseProduct(val(a.id));
  });
}

Var Tape::scale(Var a, double s) {
  Matrix out = val(a.id) * s;
  return push(std::move(out), [this, a, s, o = static_cast<int>(nodes_.size())] { grad(a.id) += nodes_[o].grad * s; });
}

Var Tape::gelu(Var a) {
  const Matrix& x = val(a.id);
  Matrix out = x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); });
  return push(std::move(out), [this, a, o = static_cast<int>(nodes_.size())] {
    const Matrix d = val(a.id).unaryExpr(
        [](double v) { return 0.5 * (1.0 + std::erf(v * kInvSqrt2)) + v * kInvSqrt2Pi * std::exp(-0.5 * v * v); });
    grad(a.id) += nodes_[o].grad.cwiseProduct(d);
  });
}

Var Tape::tanh(Var a) {
  Matrix out = val(a.id).array().tanh().matrix();
  return push(std::move(out), [this, a, o = static_cast<int>(nodes_.size())] {
    const Matrix& y = nodes_[o].value;
    grad(a.id) += nodes_[o].grad.cwiseProduct((1.0 - y.array().square()).matrix());
  });
}

Var Tape::sigmoid(Var a) {
  Matrix out = val(a.id).unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  return push(std::move(out), [this, a, o = static_cast<int>(nodes_.size())] {
    const Matrix& y = nodes_[o].value;
    grad(a.id) += nodes_[o].grad.cwiseProduct((y.array() * (1.0 - y.array())).matrix());
  });
}

Var Tape::softmax_rows(Var a, bool causal) {
  const Matrix& x = val(a.id);
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::Index width = causal ? std::min<Eigen::Index>(i + 1, x.cols()) : x.cols();
    const double mx = x.row(i).head(width).maxCoeff();
    double z = 0.0;
    for (Eigen::Index j = 0; j < width; ++j) z += (out(i, j) = std::exp(x(i, j) - mx));
    out.row(i).head(width) /= z;
    for (Eigen::Index j = width; j < x.cols(); ++j) out(i, j) = 0.0;
  }
  return push(std::move(out), [this, a, o = static_cast<int>(nodes_.size())] {
    const Matrix& y = nodes_[o].value;
    const Matrix& g = nodes_[o].grad;
    const Eigen::VectorXd dot = g.cwiseProduct(y).rowwise().sum();
    grad(a.id) += (y.array() * (g.colwise() - dot).array()).matrix();
  });
}

Var Tape::layer_norm(Var a, Var gamma, Var beta, double eps) {
  const Matrix& x = val(a.id);
  const Eigen::Index n = x.cols();
  check(val(gamma.id).cols() == n && val(beta.id).cols() == n, "layer_norm shape mismatch");
  Matrix xhat(x.rows(), n);
  Eigen::VectorXd inv_std(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mean = x.row(i).mean();
    const double var = (x.row(i).array() - mean).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (x.row(i).array() - mean) * inv_std(i);
  }
  Matrix out = (xhat.array().rowwise() * val(gamma.id).row(0).array()).rowwise() + val(beta.id).row(0).array();
  return push(std::move(out), [this, a, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std),
                               o = static_cast<int>(nodes_.size())] {
    const Matrix& g = nodes_[o].grad;
    grad(gamma.id) += g.cwiseProduct(xhat).colwise().sum();
    grad(beta.id) += g.colwise().sum();
    const Matrix gx = g.array().rowwise() * val(gamma.id).row(0).array();
    const double n = static_cast<double>(gx.cols());
    Matrix& ga = grad(a.id);
    for (Eigen::Index i = 0; i < gx.rows(); ++i) {
      const double mean_g = gx.row(i).sum() / n;
      const double mean_gx = gx.row(i).dot(xhat.row(i)) / n;
      ga.row(i).array() += inv_std(i) * (gx.row(i).array() - mean_g - xhat.row(i).array() * mean_gx);
    }
  });
}

Var Tape::gather_rows(Var table, std::span<const int> ids) {
  const Matrix& t = val(table.id);
  Matrix out(static_cast<Eigen::Index>(ids.size()), t.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    check(ids[i] >= 0 && ids[i] < t.rows(), "gather_rows index out of range");
    out.row(static_cast<Eigen::Index>(i)) = t.row(ids[i]);
  }
  std::vector<int> idx(ids.begin(), ids.end());
  return push(std::move(out), [this, table, idx = std::move(idx), o = static_cast<int>(nodes_.size())] {
    const Matrix& g = nodes_[o].grad;
    Matrix& gt = grad(table.id);
    for (std::size_t i = 0; i < idx.size(); ++i) gt.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

Var Tape::concat_cols(std::span<const Var> parts) {
  check(!parts.empty(), "concat_cols of nothing");
  const Eigen::Index rows = val(parts[0].id).rows();
  Eigen::Index cols = 0;
  for (auto p : parts) {
    check(val(p.id).rows() == rows, "concat_cols row mismatch");
    cols += val(p.id).cols();
  }
  Matrix out(rows, cols);
  Eigen::Index c = 0;
  for (auto p : parts) {
    out.middleCols(c, val(p.id).cols()) = val(p.id);
    c += val(p.id).cols();
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return push(std::move(out), [this, ps = std::move(ps), o = static_cast<int>(nodes_.size())] {
    const Matrix& g = nodes_[o].grad;
    Eigen::Index c = 0;
    for (auto p : ps) {
      const auto w = val(p.id).cols();
      grad(p.id) += g.middleCols(c, w);
      c += w;
    }
  });
}

Var Tape::slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  check(start >= 0 && start + count <= val(a.id).cols(), "slice_cols out of range");
  Matrix out = val(a.id).middleCols(start, count);
  return push(std::move(out), [this, a, start, count, o = static_cast<int>(nodes_.size())] {
    grad(a.id).middleCols(start, count) += nodes_[o].grad;
  });
}

Var Tape::concat_rows(std::span<const Var> parts) {
  check(!parts.empty(), "concat_rows of nothing");
  const Eigen::Index cols = val(parts[0].id).cols();
  Eigen::Index rows = 0;
  for (auto p : parts) {
    check(val(p.id).cols() == cols, "concat_rows column mismatch");
    rows += val(p.id).rows();
  }
  Matrix out(rows, cols);
  Eigen::Index r = 0;
  for (auto p : parts) {
    out.middleRows(r, val(p.id).rows()) = val(p.id);
    r += val(p.id).rows();
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return push(std::move(out), [this, ps = std::move(ps), o = static_cast<int>(nodes_.size())] {
    const Matrix& g = nodes_[o].grad;
    Eigen::Index r = 0;
    for (auto p : ps) {
      const auto h = val(p.id).rows();
      grad(p.id) += g.middleRows(r, h);
      r += h;
    }
  });
}

Var Tape::slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  check(start >= 0 && start + count <= val(a.id).rows(), "slice_rows out of range");
  Matrix out = val(a.id).middleRows(start, count);
  return push(std::move(out), [this, a, start, count, o = static_cast<int>(nodes_.size())] {
    grad(a.id).middleRows(start, count) += nodes_[o].grad;
  });
}

Var Tape::dropout(Var a, double p, std::mt19937_64& rng) {
  if (p <= 0.0) return a;
  const Matrix& x = val(a.id);
  Matrix mask(x.rows(), x.cols());
  const double keep = 1.0 - p;
  for (Eigen::Index i = 0; i < mask.size(); ++i)
    mask.data()[i] = (static_cast<double>(rng() >> 11) * 0x1.0p-53) < keep ? 1.0 / keep : 0.0;
  return mul(a, constant(std::move(mask)));
}

Var Tape::cross_entropy_sum(Var logits, std::span<const int> targets) {
  const Matrix& x = val(logits.id);
  check(static_cast<std::size_t>(x.rows()) == targets.size(), "cross_entropy row/target mismatch");
  Matrix probs(x.rows(), x.cols());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const int t = targets[static_cast<std::size_t>(i)];
    check(t >= 0 && t < x.cols(), "cross_entropy target out of range");
    const double mx = x.row(i).maxCoeff();
    probs.row(i) = (x.row(i).array() - mx).exp();
    const double z = probs.row(i).sum();
    probs.row(i) /= z;
    loss += (mx + std::log(z)) - x(i, t);
  }
  Matrix out(1, 1);
  out(0, 0) = loss;
  std::vector<int> tg(targets.begin(), targets.end());
  return push(std::move(out), [this, logits, probs = std::move(probs), tg = std::move(tg),
                               o = static_cast<int>(nodes_.size())] {
    const double g = nodes_[o].grad(0, 0);
    Matrix d = probs;
    for (std::size_t i = 0; i < tg.size(); ++i) d(static_cast<Eigen::Index>(i), tg[i]) -= 1.0;
    grad(logits.id) += g * d;
  });
}

void Tape::backward(Var root, double seed) {
  check(record_, "backward on a tape recorded without gradients");
  check(root.id >= 0 && static_cast<std::size_t>(root.id) < nodes_.size(), "invalid root");
  grad(root.id).setConstant(seed);
  for (int id = root.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.param || !n.backward || n.grad.size() == 0) continue;
    n.backward();
  }
}

}  // namespace apr::nn
