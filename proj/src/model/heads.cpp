// SPDX-License-Identifier: Apache-2.0
#include "lmot/model/heads.hpp"

#include <cmath>

#include "lmot/common.hpp"

namespace lmot::model {

using nn::Tensor;

Tensor box_from_head(const Tensor& head8, const SceneRange& range) {
  if (head8.cols() != 8) throw ValidationError("box_from_head: expected 8 columns");
  Eigen::RowVector3d mins(range.min[0], range.min[1], range.min[2]);
  Eigen::RowVector3d spans(range.span(0), range.span(1), range.span(2));
  Tensor center = nn::add(nn::mul(nn::sigmoid(nn::slice_cols(head8, 0, 3)),
                                  Tensor::constant(spans)),
                          Tensor::constant(mins));
  const double sa = 0.5 * (std::log(kMaxBoxSize) - std::log(kMinBoxSize));
  const double sb = 0.5 * (std::log(kMaxBoxSize) + std::log(kMinBoxSize));
  Tensor size = nn::exp_t(nn::add_scalar(nn::scale(nn::tanh_t(nn::slice_cols(head8, 3, 3)), sa), sb));
  Tensor yaw = nn::atan2_t(nn::slice_cols(head8, 6, 1), nn::slice_cols(head8, 7, 1));
  return nn::concat_cols({center, size, yaw});
}

Eigen::MatrixXd padded_sinusoidal_pe(const Eigen::MatrixXd& centers, int d,
                                     const SceneRange& range) {
  if (d <= 0) throw ValidationError("padded_sinusoidal_pe: d must be positive");
  const int pe_dim = (d / 6) * 6;
  Eigen::MatrixXd pe = Eigen::MatrixXd::Zero(centers.rows(), d);
  if (pe_dim > 0) pe.leftCols(pe_dim) = nn::sinusoidal_pe(centers, pe_dim, range);
  return pe;
}

Tensor padded_sinusoidal_pe_graph(const Tensor& centers, int d, const SceneRange& range) {
  if (d <= 0) throw ValidationError("padded_sinusoidal_pe: d must be positive");
  if (centers.cols() != 3) throw ValidationError("padded_sinusoidal_pe: centers must be n x 3");
  const int pairs = d / 6;
  std::vector<Tensor> cols;
  cols.reserve(static_cast<std::size_t>(pairs) * 6);
  for (int axis = 0; axis < 3; ++axis) {
    // True division keeps the values bit-identical to sinusoidal_pe.
    const Tensor span = Tensor::constant(
        Eigen::MatrixXd::Constant(centers.rows(), 1, range.span(axis)));
    const Tensor u = nn::div(nn::slice_cols(centers, axis, 1), span);
    for (int p = 0; p < pairs; ++p) {
      const Tensor theta = nn::scale(u, M_PI * std::ldexp(1.0, p));  // pi * 2^p * u
      cols.push_back(nn::sin_t(theta));
      cols.push_back(nn::cos_t(theta));
    }
  }
  const Eigen::Index pad = d - 6 * pairs;
  if (pad > 0)
    cols.push_back(Tensor::constant(Eigen::MatrixXd::Zero(centers.rows(), pad)));
  return cols.size() == 1 ? cols.front() : nn::concat_cols(cols);
}

}  // namespace lmot::model
