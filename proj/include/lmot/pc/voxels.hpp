// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lmot/core/types.hpp"
#include "lmot/nn/layers.hpp"
#include "lmot/pc/pointcloud.hpp"

namespace lmot::pc {

struct VoxelGridSpec {
  std::array<double, 3> range_min{-32.0, -32.0, -3.0};
  std::array<double, 3> range_max{32.0, 32.0, 3.0};
  std::array<double, 3> voxel_size{0.8, 0.8, 1.5};
  int max_points_per_voxel = 16;
  int max_voxels = 512;

  void validate() const;  // positive sizes, range an exact multiple of them
  std::array<int, 3> dims() const;
};

struct Voxel {
  std::int64_t linear_index = 0;  // ix + nx*(iy + ny*iz)
  std::array<int, 3> coords{0, 0, 0};
  std::array<double, 3> center{0, 0, 0};
  std::vector<StackedPoint> points;  // truncated at max_points_per_voxel
};

// Bins in-range points into voxels (half-open upper bounds). Voxels beyond
// max_voxels are discarded, keeping the fullest ones, ties to lower linear
// index. Output is sorted by linear index.
std::vector<Voxel> voxelize(const StackedCloud& cloud, const VoxelGridSpec& spec);

// Attention context tokens produced from one stacked+voxelized cloud.
struct FeatureTokens {
  nn::Tensor tokens;        // M x d, undefined when empty()
  Eigen::MatrixXd centers;  // M x 3

  std::size_t count() const { return static_cast<std::size_t>(centers.rows()); }
  bool empty() const { return centers.rows() == 0; }
};

// Single VFE layer: per point (x, y, z, intensity, lag, offset-from-centroid)
// -> shared FFN -> per-voxel max pool, plus a sinusoidal encoding of the
// voxel center. Weights live in the owning ParameterStore.
class VoxelEncoder {
 public:
  VoxelEncoder() = default;
  VoxelEncoder(nn::ParameterStore& ps, const std::string& prefix, int model_dim,
               SceneRange pe_range);

  FeatureTokens encode(const std::vector<Voxel>& voxels) const;
  int model_dim() const { return model_dim_; }

  static constexpr int kPointFeatures = 8;  // x y z intensity lag dx dy dz

 private:
  nn::FFN ffn_;
  int model_dim_ = 0;
  int pe_dim_ = 0;  // largest multiple of 6 <= model_dim, zero padded up
  SceneRange pe_range_;
};

}  // namespace lmot::pc
