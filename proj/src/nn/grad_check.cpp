// SPDX-License-Identifier: Apache-2.0
#include "lmot/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "lmot/common.hpp"

namespace lmot::nn {

std::string GradCheckReport::describe() const {
  if (worst_row < 0) return "grad_check: no coordinates checked";
  return "grad_check: max rel err " + std::to_string(max_rel_err) + " at " + worst_param + "(" +
         std::to_string(worst_row) + "," + std::to_string(worst_col) + "), analytic " +
         std::to_string(analytic) + " vs numeric " + std::to_string(numeric);
}

GradCheckReport grad_check(const std::function<Tensor()>& loss_fn,
                           const std::vector<Tensor>& params, double h) {
  for (const auto& p : params) p.zero_grad();
  Tensor loss = loss_fn();
  loss.backward();

  std::vector<Eigen::MatrixXd> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(p.grad());

  GradCheckReport rep;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor p = params[pi];
    auto& val = p.mutable_value();
    for (Eigen::Index r = 0; r < val.rows(); ++r) {
      for (Eigen::Index c = 0; c < val.cols(); ++c) {
        const double saved = val(r, c);
        val(r, c) = saved + h;
        const double fp = loss_fn().item();
        val(r, c) = saved - h;
        const double fm = loss_fn().item();
        val(r, c) = saved;
        const double numeric = (fp - fm) / (2.0 * h);
        const double a = analytic[pi](r, c);
        if (!std::isfinite(numeric) || !std::isfinite(a))
          throw NumericError("grad_check: non-finite derivative at parameter '" + p.name() + "'");
        const double rel =
            std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
        if (rel > rep.max_rel_err) {
          rep.max_rel_err = rel;
          rep.worst_param = p.name().empty() ? ("param#" + std::to_string(pi)) : p.name();
          rep.worst_row = r;
          rep.worst_col = c;
          rep.analytic = a;
          rep.numeric = numeric;
        }
      }
    }
  }
  if (rep.worst_row < 0 && !params.empty()) {
    // all-zero case: record something sensible
    rep.worst_param = params[0].name();
    rep.worst_row = 0;
    rep.worst_col = 0;
  }
  return rep;
}

}  // namespace lmot::nn
