#pragma once

#include "apr/common/tensor_archive.hpp"
#include "apr/nn/parameter.hpp"

namespace apr::nn {

struct AdamConfig {
  double learning_rate = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 1.0;  // global gradient norm; <= 0 disables clipping
};

// Adam with bias correction and global-norm clipping.
class Adam {
 public:
  Adam(ParameterSet& params, AdamConfig config);

  // Applies one update from the accumulated gradients, then zeroes them.
  // Returns the gradient norm before clipping.
  double step();

  long long steps_taken() const { return t_; }

  // Moments are stored as "m/<param>" and "v/<param>"; the step count under meta.
  void export_state(TensorArchive& archive) const;
  void import_state(const TensorArchive& archive);

 private:
  ParameterSet& params_;
  AdamConfig config_;
  long long t_ = 0;
  std::vector<Matrix> m_, v_;
};

}  // namespace apr::nn
