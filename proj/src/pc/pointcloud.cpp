// SPDX-License-Identifier: Apache-2.0
#include "lmot/pc/pointcloud.hpp"

#include <cmath>
#include <fstream>

#include "lmot/common.hpp"

namespace lmot::pc {

void PointCloud::validate() const {
  for (const auto& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
      throw ValidationError("PointCloud: non-finite coordinate");
    if (!std::isfinite(p.intensity) || p.intensity < 0.0 || p.intensity > 1.0)
      throw ValidationError("PointCloud: intensity outside [0,1]");
  }
}

StackedCloud stack_sweeps(const std::vector<PointCloud>& clouds,
                          const std::vector<RigidTransform>& poses,
                          const RigidTransform& target_pose, std::int64_t target_timestamp_us,
                          std::size_t max_sweeps) {
  if (clouds.size() != poses.size())
    throw ValidationError("stack_sweeps: cloud/pose count mismatch");
  if (clouds.size() > max_sweeps)
    throw ValidationError("stack_sweeps: more sweeps than the configured maximum");
  target_pose.validate_rigid();
  const RigidTransform target_inv = target_pose.inverse();

  StackedCloud out;
  std::size_t total = 0;
  for (const auto& c : clouds) total += c.points.size();
  out.points.reserve(total);

  for (std::size_t s = 0; s < clouds.size(); ++s) {
    poses[s].validate_rigid();
    clouds[s].validate();
    const RigidTransform rel = target_inv * poses[s];
    const double lag =
        static_cast<double>(target_timestamp_us - clouds[s].timestamp_us) * 1e-6;
    for (const auto& p : clouds[s].points) {
      const auto q = rel.apply_point({p.x, p.y, p.z});
      out.points.push_back({q[0], q[1], q[2], p.intensity, lag});
    }
  }
  return out;
}

PointCloud read_cloud_bin(const std::string& path, std::int64_t timestamp_us) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw ValidationError("point cloud '" + path + "': cannot open");
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes % (4 * sizeof(float)) != 0)
    throw ValidationError("point cloud '" + path + "': size is not a multiple of 16 bytes");
  in.seekg(0);

  PointCloud cloud;
  cloud.timestamp_us = timestamp_us;
  const std::size_t n = bytes / (4 * sizeof(float));
  cloud.points.reserve(n);
  double max_intensity = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    float f[4];
    in.read(reinterpret_cast<char*>(f), sizeof(f));
    if (!in) throw ValidationError("point cloud '" + path + "': truncated read");
    cloud.points.push_back({f[0], f[1], f[2], f[3]});
    max_intensity = std::max(max_intensity, static_cast<double>(f[3]));
  }
  if (max_intensity > 1.0)
    for (auto& p : cloud.points) p.intensity /= 255.0;
  cloud.validate();
  return cloud;
}

void write_cloud_bin(const std::string& path, const PointCloud& cloud) {
  cloud.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("point cloud '" + path + "': cannot open for writing");
  for (const auto& p : cloud.points) {
    const float f[4] = {static_cast<float>(p.x), static_cast<float>(p.y),
                        static_cast<float>(p.z), static_cast<float>(p.intensity)};
    out.write(reinterpret_cast<const char*>(f), sizeof(f));
  }
  if (!out) throw ValidationError("point cloud '" + path + "': write failed");
}

}  // namespace lmot::pc
