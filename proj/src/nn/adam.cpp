#include "apr/nn/adam.hpp"

#include <cmath>

#include "apr/common/errors.hpp"

namespace apr::nn {

Adam::Adam(ParameterSet& params, AdamConfig config) : params_(params), config_(config) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    m_.push_back(Matrix::Zero(params_[i].value.rows(), params_[i].value.cols()));
    v_.push_back(Matrix::Zero(params_[i].value.rows(), params_[i].value.cols()));
  }
}

double Adam::step() {
  const double norm = params_.grad_norm();
  const double clip = (config_.clip_norm > 0.0 && norm > config_.clip_norm) ? config_.clip_norm / norm : 1.0;
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = params_[i];
    const Matrix g = p.grad * clip;
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g.cwiseProduct(g);
    p.value.array() -=
        config_.learning_rate * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + config_.epsilon);
  }
  params_.zero_grad();
  return norm;
}

void Adam::export_state(TensorArchive& archive) const {
  archive.meta["adam_steps"] = t_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    archive.tensors.push_back({"m/" + params_[i].name, m_[i]});
    archive.tensors.push_back({"v/" + params_[i].name, v_[i]});
  }
}

void Adam::import_state(const TensorArchive& archive) {
  t_ = archive.meta.at("adam_steps").get<long long>();
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto* m = archive.find("m/" + params_[i].name);
    const auto* v = archive.find("v/" + params_[i].name);
    if (!m || !v || m->rows() != m_[i].rows() || m->cols() != m_[i].cols())
      throw DataError("optimizer state does not match parameter " + params_[i].name);
    m_[i] = *m;
    v_[i] = *v;
  }
}

}  // namespace apr::nn
