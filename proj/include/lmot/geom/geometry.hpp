// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>

#include "lmot/core/pose.hpp"
#include "lmot/core/types.hpp"

namespace lmot::geom {

// Axis-aligned box given by min/max corners.
struct AABB3 {
  std::array<double, 3> min{0, 0, 0};
  std::array<double, 3> max{0, 0, 0};

  double volume() const;
  bool contains(const std::array<double, 3>& p) const;
};

// Tightest axis-aligned box enclosing the yaw-rotated footprint. In the xy
// plane the half-extents are (l*|cos yaw| + w*|sin yaw|)/2 along x and
// (l*|sin yaw| + w*|cos yaw|)/2 along y; z is unaffected by yaw.
AABB3 box_to_aabb(const BBox3D& box);

double intersection_volume(const AABB3& a, const AABB3& b);
AABB3 enclosing(const AABB3& a, const AABB3& b);

// Volume IoU of the two axis-aligned hulls. Zero-volume inputs are invalid.
double iou_aabb(const AABB3& a, const AABB3& b);

// Generalized IoU on the hulls: iou - (hull - union) / hull, in [-1, 1].
double giou_aabb(const AABB3& a, const AABB3& b);

inline double giou_boxes(const BBox3D& a, const BBox3D& b) {
  return giou_aabb(box_to_aabb(a), box_to_aabb(b));
}

// Euclidean distance between box centers in the ground plane (z ignored).
double bev_center_distance(const BBox3D& a, const BBox3D& b);

// Maps a box through a rigid transform: center via the full transform, yaw by
// rotating the heading direction and reading its ground-plane angle.
BBox3D transform_box(const BBox3D& box, const RigidTransform& t);

}  // namespace lmot::geom
