// SPDX-License-Identifier: Apache-2.0
#include "lmot/pc/voxels.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "lmot/common.hpp"

namespace lmot::pc {

void VoxelGridSpec::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (!(voxel_size[a] > 0.0)) throw ValidationError("VoxelGridSpec: voxel size must be positive");
    if (!(range_max[a] > range_min[a]))
      throw ValidationError("VoxelGridSpec: empty range on axis " + std::to_string(a));
    const double cells = (range_max[a] - range_min[a]) / voxel_size[a];
    if (std::abs(cells - std::round(cells)) > 1e-9)
      throw ValidationError("VoxelGridSpec: range must divide into whole voxels on axis " +
                            std::to_string(a));
  }
  if (max_points_per_voxel < 1 || max_voxels < 1)
    throw ValidationError("VoxelGridSpec: caps must be positive");
}

std::array<int, 3> VoxelGridSpec::dims() const {
  std::array<int, 3> d;
  for (int a = 0; a < 3; ++a)
    d[a] = static_cast<int>(std::round((range_max[a] - range_min[a]) / voxel_size[a]));
  return d;
}

std::vector<Voxel> voxelize(const StackedCloud& cloud, const VoxelGridSpec& spec) {
  spec.validate();
  const auto nd = spec.dims();

  std::unordered_map<std::int64_t, Voxel> cells;
  std::unordered_map<std::int64_t, std::size_t> full_counts;  // pre-truncation sizes
  for (const auto& p : cloud.points) {
    const double c[3] = {p.x, p.y, p.z};
    std::array<int, 3> idx;
    bool inside = true;
    for (int a = 0; a < 3; ++a) {
      // half-open [min, max): points at or beyond range_max drop out
      if (c[a] < spec.range_min[a] || c[a] >= spec.range_max[a]) {
        inside = false;
        break;
      }
      idx[a] = static_cast<int>(std::floor((c[a] - spec.range_min[a]) / spec.voxel_size[a]));
      idx[a] = std::clamp(idx[a], 0, nd[a] - 1);  // fp guard at the seam
    }
    if (!inside) continue;
    const std::int64_t lin =
        idx[0] + static_cast<std::int64_t>(nd[0]) * (idx[1] + static_cast<std::int64_t>(nd[1]) * idx[2]);
    auto& vox = cells[lin];
    if (vox.points.empty() && full_counts[lin] == 0) {
      vox.linear_index = lin;
      vox.coords = idx;
      for (int a = 0; a < 3; ++a)
        vox.center[a] = spec.range_min[a] + (idx[a] + 0.5) * spec.voxel_size[a];
    }
    ++full_counts[lin];
    if (vox.points.size() < static_cast<std::size_t>(spec.max_points_per_voxel))
      vox.points.push_back(p);  // arrival-order truncation
  }

  std::vector<Voxel> out;
  out.reserve(cells.size());
  for (auto& [lin, vox] : cells) out.push_back(std::move(vox));
  std::sort(out.begin(), out.end(),
            [](const Voxel& a, const Voxel& b) { return a.linear_index < b.linear_index; });

  if (out.size() > static_cast<std::size_t>(spec.max_voxels)) {
    // keep the fullest voxels; ties prefer lower linear index
    std::stable_sort(out.begin(), out.end(), [&](const Voxel& a, const Voxel& b) {
      return full_counts.at(a.linear_index) > full_counts.at(b.linear_index);
    });
    out.resize(static_cast<std::size_t>(spec.max_voxels));
    std::sort(out.begin(), out.end(),
              [](const Voxel& a, const Voxel& b) { return a.linear_index < b.linear_index; });
  }
  return out;
}

VoxelEncoder::VoxelEncoder(nn::ParameterStore& ps, const std::string& prefix, int model_dim,
                           SceneRange pe_range)
    : ffn_(ps, prefix + ".vfe", kPointFeatures, model_dim, model_dim),
      model_dim_(model_dim),
      pe_dim_((model_dim / 6) * 6),
      pe_range_(pe_range) {
  if (model_dim < 6) throw ValidationError("VoxelEncoder: model_dim must be at least 6");
}

FeatureTokens VoxelEncoder::encode(const std::vector<Voxel>& voxels) const {
  FeatureTokens out;
  out.centers = Eigen::MatrixXd(static_cast<Eigen::Index>(voxels.size()), 3);
  if (voxels.empty()) return out;

  std::vector<nn::Tensor> pooled;
  pooled.reserve(voxels.size());
  for (std::size_t i = 0; i < voxels.size(); ++i) {
    const auto& vox = voxels[i];
    if (vox.points.empty()) throw ValidationError("VoxelEncoder: voxel without points");
    out.centers.row(static_cast<Eigen::Index>(i)) << vox.center[0], vox.center[1], vox.center[2];

    Eigen::MatrixXd feats(static_cast<Eigen::Index>(vox.points.size()), kPointFeatures);
    double cx = 0, cy = 0, cz = 0;
    for (const auto& p : vox.points) {
      cx += p.x;
      cy += p.y;
      cz += p.z;
    }
    const double inv = 1.0 / static_cast<double>(vox.points.size());
    cx *= inv;
    cy *= inv;
    cz *= inv;
    for (std::size_t r = 0; r < vox.points.size(); ++r) {
      const auto& p = vox.points[r];
      feats.row(static_cast<Eigen::Index>(r)) << p.x, p.y, p.z, p.intensity, p.lag_s, p.x - cx,
          p.y - cy, p.z - cz;
    }
    pooled.push_back(nn::col_max(ffn_.forward(nn::Tensor::constant(std::move(feats)))));
  }

  nn::Tensor tokens = nn::concat_rows(pooled);
  Eigen::MatrixXd pe = Eigen::MatrixXd::Zero(out.centers.rows(), model_dim_);
  if (pe_dim_ > 0)
    pe.leftCols(pe_dim_) = nn::sinusoidal_pe(out.centers, pe_dim_, pe_range_);
  out.tokens = nn::add(tokens, nn::Tensor::constant(std::move(pe)));
  return out;
}

}  // namespace lmot::pc
