// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lmot/nn/grad_check.hpp"

namespace lmot::train {

struct BlockCheck {
  std::string name;
  nn::GradCheckReport report;
};

inline constexpr double kGradCheckTolerance = 1e-5;

// Finite-difference verification of every differentiable block: the nn
// primitives (linear, layer_norm, attention, ffn), the isolated loss terms
// (L1 box, focal, GIoU), a full smoother loss on a two-frame window, and a
// full tracker clip loss unrolled over two frames. Deterministic per seed.
std::vector<BlockCheck> gradcheck_suite(std::uint64_t seed);

}  // namespace lmot::train
