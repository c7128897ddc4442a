#include "apr/nn/parameter.hpp"

#include <cmath>

#include "apr/common/errors.hpp"
#include "apr/common/random.hpp"

namespace apr::nn {

Parameter& ParameterSet::add(std::string name, Eigen::Index rows, Eigen::Index cols) {
  if (find(name)) throw ConfigError("duplicate parameter name: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = std::move(name);
  p->value = Matrix::Zero(rows, cols);
  p->grad = Matrix::Zero(rows, cols);
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter* ParameterSet::find(const std::string& name) {
  for (auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

const Parameter* ParameterSet::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p->grad.setZero();
}

double ParameterSet::grad_norm() const {
  double sq = 0.0;
  for (const auto& p : params_) sq += p->grad.squaredNorm();
  return std::sqrt(sq);
}

void ParameterSet::init_normal(std::mt19937_64& rng, double stddev) {
  for (auto& p : params_)
    for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] = stddev * standard_normal(rng);
}

void ParameterSet::init_uniform(std::mt19937_64& rng, double bound) {
  for (auto& p : params_)
    for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] = bound * (2.0 * uniform01(rng) - 1.0);
}

}  // namespace apr::nn
