// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "lmot/core/types.hpp"
#include "lmot/nn/layers.hpp"

namespace lmot::model {

// Bounds for the size head: exp of a tanh-squashed logit stays in
// [kMinBoxSize, kMaxBoxSize] meters.
inline constexpr double kMinBoxSize = 0.3;
inline constexpr double kMaxBoxSize = 20.0;

// Shared regression transform: per row, 8 raw logits (center 3, size 3,
// sin, cos) -> 7 box parameters. Centers sigmoid into the scene range,
// sizes stay bounded, yaw comes from atan2 of the trailing pair.
nn::Tensor box_from_head(const nn::Tensor& head8, const SceneRange& range);

// Sinusoidal encoding of 3-D centers, zero-padded on the right to d columns
// (the encoding itself spans the largest multiple of 6 not exceeding d).
Eigen::MatrixXd padded_sinusoidal_pe(const Eigen::MatrixXd& centers, int d,
                                     const SceneRange& range);

// Differentiable twin of padded_sinusoidal_pe (same values, live gradient).
nn::Tensor padded_sinusoidal_pe_graph(const nn::Tensor& centers, int d,
                                      const SceneRange& range);

}  // namespace lmot::model
