// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "lmot/nn/tensor.hpp"

namespace lmot::nn {

struct AdamWConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;

  void validate() const;
};

// AdamW with decoupled weight decay. Parameters without an accumulated
// gradient are treated as zero-gradient (decay still applies).
class AdamW {
 public:
  AdamW(std::vector<Tensor> params, AdamWConfig cfg);

  void step();  // throws NumericError naming the parameter on non-finite grads
  void zero_grad();
  int step_count() const { return step_; }
  AdamWConfig& config() { return cfg_; }

 private:
  std::vector<Tensor> params_;
  std::vector<Eigen::MatrixXd> m_, v_;
  AdamWConfig cfg_;
  int step_ = 0;
};

}  // namespace lmot::nn
