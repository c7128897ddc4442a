#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace apr::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;  // same shape as value, accumulated by Tape::backward
};

// Owns parameters at stable addresses, in registration order.
class ParameterSet {
 public:
  Parameter& add(std::string name, Eigen::Index rows, Eigen::Index cols);

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;

  std::size_t scalar_count() const;
  void zero_grad();
  double grad_norm() const;

  void init_normal(std::mt19937_64& rng, double stddev);
  void init_uniform(std::mt19937_64& rng, double bound);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

}  // namespace apr::nn
