#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "apr/common/random.hpp"
#include "apr/common/tensor_archive.hpp"
#include "apr/nn/adam.hpp"
#include "apr/nn/tape.hpp"

namespace {

using apr::nn::Matrix;
using apr::nn::Parameter;
using apr::nn::Tape;
using apr::nn::Var;

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = apr::standard_normal(rng);
  return m;
}

// Reduces any output to a scalar through fixed random weights so every entry matters.
Var weighted_sum(Tape& t, Var x, const Matrix& weights) {
  const auto rows = t.value(x).rows(), cols = t.value(x).cols();
  const Var w = t.constant(weights.topLeftCorner(rows, cols));
  const Var ones_left = t.constant(Matrix::Ones(1, rows));
  const Var ones_right = t.constant(Matrix::Ones(cols, 1));
  return t.matmul(t.matmul(ones_left, t.mul(x, w)), ones_right);
}

using Build = std::function<Var(Tape&, std::vector<Var>&)>;

double max_rel_error(std::vector<Parameter>& params, const Build& build, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Matrix weights = random_matrix(rng, 16, 16);
  auto evaluate = [&](bool grads) {
    Tape t(grads);
    std::vector<Var> inputs;
    for (auto& p : params) inputs.push_back(t.param(p));
    const Var out = weighted_sum(t, build(t, inputs), weights);
    if (grads) t.backward(out);
    return t.scalar(out);
  };
  for (auto& p : params) p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
  evaluate(true);
  double worst = 0.0;
  const double h = 1e-6;
  for (auto& p : params) {
    for (Eigen::Index k = 0; k < p.value.size(); ++k) {
      const double saved = p.value.data()[k];
      p.value.data()[k] = saved + h;
      const double up = evaluate(false);
      p.value.data()[k] = saved - h;
      const double down = evaluate(false);
      p.value.data()[k] = saved;
      const double numeric = (up - down) / (2 * h);
      const double analytic = p.grad.data()[k];
      worst = std::max(worst, std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-6}));
    }
  }
  return worst;
}

std::vector<Parameter> make_params(std::mt19937_64& rng, std::vector<std::pair<int, int>> shapes) {
  std::vector<Parameter> out;
  for (auto [r, c] : shapes) out.push_back({"p", random_matrix(rng, r, c), Matrix()});
  return out;
}

struct OpCase {
  const char* name;
  std::vector<std::pair<int, int>> shapes;
  Build build;
};

class TapeOps : public ::testing::TestWithParam<int> {};

const std::vector<OpCase>& op_cases() {
  static const std::vector<OpCase> cases = {
      {"matmul", {{3, 4}, {4, 5}}, [](Tape& t, auto& x) { return t.matmul(x[0], x[1]); }},
      {"matmul_nt", {{3, 4}, {5, 4}}, [](Tape& t, auto& x) { return t.matmul_nt(x[0], x[1]); }},
      {"add", {{3, 4}, {3, 4}}, [](Tape& t, auto& x) { return t.add(x[0], x[1]); }},
      {"add_row", {{3, 4}, {1, 4}}, [](Tape& t, auto& x) { return t.add_row(x[0], x[1]); }},
      {"mul", {{3, 4}, {3, 4}}, [](Tape& t, auto& x) { return t.mul(x[0], x[1]); }},
      {"scale", {{3, 4}}, [](Tape& t, auto& x) { return t.scale(x[0], -2.5); }},
      {"gelu", {{3, 4}}, [](Tape& t, auto& x) { return t.gelu(x[0]); }},
      {"tanh", {{3, 4}}, [](Tape& t, auto& x) { return t.tanh(x[0]); }},
      {"sigmoid", {{3, 4}}, [](Tape& t, auto& x) { return t.sigmoid(x[0]); }},
      {"softmax", {{3, 5}}, [](Tape& t, auto& x) { return t.softmax_rows(x[0]); }},
      {"causal_softmax", {{4, 4}}, [](Tape& t, auto& x) { return t.softmax_rows(x[0], true); }},
      {"layer_norm", {{3, 6}, {1, 6}, {1, 6}}, [](Tape& t, auto& x) { return t.layer_norm(x[0], x[1], x[2]); }},
      {"gather_rows", {{5, 3}}, [](Tape& t, auto& x) {
         const std::vector<int> ids = {4, 0, 4, 2};
         return t.gather_rows(x[0], ids);
       }},
      {"concat_slice_cols", {{3, 2}, {3, 4}}, [](Tape& t, auto& x) {
         const std::vector<Var> parts = {x[0], x[1]};
         return t.slice_cols(t.concat_cols(parts), 1, 4);
       }},
      {"concat_slice_rows", {{2, 3}, {3, 3}}, [](Tape& t, auto& x) {
         const std::vector<Var> parts = {x[0], x[1]};
         return t.slice_rows(t.concat_rows(parts), 1, 3);
       }},
      {"cross_entropy", {{4, 6}}, [](Tape& t, auto& x) {
         const std::vector<int> targets = {1, 5, 0, 1};
         return t.cross_entropy_sum(x[0], targets);
       }},
      {"reuse", {{3, 3}}, [](Tape& t, auto& x) { return t.matmul(x[0], t.tanh(x[0])); }},
  };
  return cases;
}

TEST_P(TapeOps, GradientMatchesCentralDifference) {
  const auto& c = op_cases()[static_cast<std::size_t>(GetParam())];
  std::mt19937_64 rng(100 + GetParam());
  auto params = make_params(rng, c.shapes);
  EXPECT_LT(max_rel_error(params, c.build, 7), 1e-6) << c.name;
}

INSTANTIATE_TEST_SUITE_P(All, TapeOps, ::testing::Range(0, 17));

TEST(Tape, SoftmaxRowsSumToOneAndCausalMask) {
  std::mt19937_64 rng(1);
  Tape t(false);
  const Var x = t.constant(random_matrix(rng, 4, 4));
  const Matrix s = t.value(t.softmax_rows(x, true));
  for (Eigen::Index i = 0; i < 4; ++i) {
    EXPECT_NEAR(s.row(i).sum(), 1.0, 1e-12);
    for (Eigen::Index j = i + 1; j < 4; ++j) EXPECT_EQ(s(i, j), 0.0);
  }
}

TEST(Tape, DropoutZeroIsIdentityAndScalesKeptUnits) {
  std::mt19937_64 rng(2);
  Tape t(false);
  const Matrix m = Matrix::Ones(50, 40);
  const Var x = t.constant(m);
  EXPECT_EQ(t.value(t.dropout(x, 0.0, rng)), m);
  const Matrix d = t.value(t.dropout(x, 0.25, rng));
  std::size_t kept = 0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (d.data()[i] != 0.0) {
      EXPECT_NEAR(d.data()[i], 1.0 / 0.75, 1e-12);
      ++kept;
    }
  }
  EXPECT_NEAR(static_cast<double>(kept) / 2000.0, 0.75, 0.05);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  apr::nn::ParameterSet params;
  auto& p = params.add("w", 1, 3);
  p.value << 1.0, -1.0, 0.5;
  p.grad = Matrix::Zero(1, 3);
  p.grad << 0.2, -0.1, 0.0;
  apr::nn::Adam adam(params, {.learning_rate = 0.01, .clip_norm = 0.0});
  adam.step();
  // With bias correction the first update is lr * g / (|g| + eps).
  EXPECT_NEAR(p.value(0, 0), 1.0 - 0.01, 1e-9);
  EXPECT_NEAR(p.value(0, 1), -1.0 + 0.01, 1e-9);
  EXPECT_NEAR(p.value(0, 2), 0.5, 1e-12);
  EXPECT_EQ(p.grad.norm(), 0.0);
  EXPECT_EQ(adam.steps_taken(), 1);
}

TEST(Adam, ClipsGlobalNorm) {
  apr::nn::ParameterSet params;
  auto& p = params.add("w", 1, 2);
  p.value.setZero();
  p.grad = Matrix::Zero(1, 2);
  p.grad << 30.0, 40.0;
  apr::nn::Adam adam(params, {.learning_rate = 0.1, .clip_norm = 1.0});
  EXPECT_NEAR(adam.step(), 50.0, 1e-12);
}

TEST(Adam, StateRoundTripContinuesIdentically) {
  std::mt19937_64 rng(3);
  auto run = [&](bool reload) {
    apr::nn::ParameterSet params;
    auto& p = params.add("w", 2, 2);
    p.value = Matrix::Constant(2, 2, 0.3);
    apr::nn::Adam adam(params, {.learning_rate = 0.05});
    std::mt19937_64 g(9);
    for (int s = 0; s < 6; ++s) {
      p.grad = random_matrix(g, 2, 2);
      adam.step();
      if (reload && s == 2) {
        apr::TensorArchive a;
        adam.export_state(a);
        apr::nn::Adam fresh(params, {.learning_rate = 0.05});
        fresh.import_state(a);
        for (int r = 3; r < 6; ++r) {
          p.grad = random_matrix(g, 2, 2);
          fresh.step();
        }
        return Matrix(p.value);
      }
    }
    return Matrix(p.value);
  };
  EXPECT_EQ(run(false), run(true));
}

}  // namespace
