// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lmot/nn/tensor.hpp"

namespace lmot::nn {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  Eigen::Index worst_row = -1;
  Eigen::Index worst_col = -1;
  double analytic = 0.0;
  double numeric = 0.0;

  bool passed(double tol) const { return max_rel_err <= tol; }
  std::string describe() const;
};

// Compares reverse-mode gradients of loss_fn (a scalar-valued graph builder
// reading the current parameter values) against central finite differences
// with step h on every coordinate of every parameter.
// rel err = |analytic - numeric| / max(1, |analytic|, |numeric|).
GradCheckReport grad_check(const std::function<Tensor()>& loss_fn,
                           const std::vector<Tensor>& params, double h = 1e-5);

}  // namespace lmot::nn
