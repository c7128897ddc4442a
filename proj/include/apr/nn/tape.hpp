#pragma once

#include <functional>
#include <random>
#include <span>
#include <vector>

#include "apr/nn/parameter.hpp"

namespace apr::nn {

// Handle to a value recorded on a Tape.
struct Var {
  int id = -1;
};

// Reverse-mode automatic differentiation over dense matrices. Sequences are laid out
// one token per row. A tape is single-use: record a forward pass, call backward once,
// discard. With record_gradients = false no backward closures are kept.
class Tape {
 public:
  explicit Tape(bool record_gradients = true) : record_(record_gradients) {}

  Var param(Parameter& p);
  Var constant(Matrix m);

  const Matrix& value(Var v) const;
  double scalar(Var v) const { return value(v)(0, 0); }

  Var matmul(Var a, Var b);     // a * b
  Var matmul_nt(Var a, Var b);  // a * b^T
  Var add(Var a, Var b);
  Var add_row(Var a, Var row);  // row (1 x n) broadcast over every row of a
  Var mul(Var a, Var b);        // elementwise
  Var scale(Var a, double s);
  Var gelu(Var a);  // erf form
  Var tanh(Var a);
  Var sigmoid(Var a);
  // Row-wise softmax. With causal = true, entry (i, j) for j > i gets probability 0.
  Var softmax_rows(Var a, bool causal = false);
  // Row-wise normalization; gamma and beta are 1 x n.
  Var layer_norm(Var a, Var gamma, Var beta, double eps = 1e-5);
  Var gather_rows(Var table, std::span<const int> ids);
  Var concat_cols(std::span<const Var> parts);
  Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
  Var concat_rows(std::span<const Var> parts);
  Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
  // Inverted dropout; identity when p == 0.
  Var dropout(Var a, double p, std::mt19937_64& rng);
  // Sum over rows of -log softmax(logits)[row, target[row]]; 1 x 1.
  Var cross_entropy_sum(Var logits, std::span<const int> targets);

  // Seeds d(root)/d(root) = seed and accumulates gradients into every Parameter used.
  void backward(Var root, double seed = 1.0);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Parameter* param = nullptr;
    std::function<void()> backward;
  };

  Var push(Matrix value, std::function<void()> backward = {});
  Matrix& grad(int id);
  const Matrix& val(int id) const;

  bool record_;
  std::vector<Node> nodes_;
};

}  // namespace apr::nn
