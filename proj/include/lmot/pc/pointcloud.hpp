// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lmot/core/pose.hpp"

namespace lmot::pc {

struct PointXYZI {
  double x = 0, y = 0, z = 0;
  double intensity = 0;  // normalized to [0, 1]
};

// One LiDAR sweep in its own sensor/ego frame.
struct PointCloud {
  std::vector<PointXYZI> points;
  std::int64_t timestamp_us = 0;

  void validate() const;  // finite coords, intensity in [0,1]
};

// A stacked point carries the sweep's age relative to the key frame.
struct StackedPoint {
  double x = 0, y = 0, z = 0;
  double intensity = 0;
  double lag_s = 0;  // key time minus sweep time, seconds
};

// Multi-sweep aggregate in key-frame ego coordinates.
struct StackedCloud {
  std::vector<StackedPoint> points;
};

inline constexpr std::size_t kDefaultMaxSweeps = 10;

// Maps every sweep into the target (key-frame) ego coordinates and appends
// the time lag channel. Total point count is preserved.
StackedCloud stack_sweeps(const std::vector<PointCloud>& clouds,
                          const std::vector<RigidTransform>& poses,
                          const RigidTransform& target_pose, std::int64_t target_timestamp_us,
                          std::size_t max_sweeps = kDefaultMaxSweeps);

// Little-endian binary of consecutive float32 (x, y, z, intensity) quadruples.
// Intensities above 1 are assumed byte-scaled and divided by 255 on read.
PointCloud read_cloud_bin(const std::string& path, std::int64_t timestamp_us);
void write_cloud_bin(const std::string& path, const PointCloud& cloud);

}  // namespace lmot::pc
