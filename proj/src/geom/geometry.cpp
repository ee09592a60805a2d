// SPDX-License-Identifier: Apache-2.0
#include "lmot/geom/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "lmot/common.hpp"

namespace lmot::geom {

double AABB3::volume() const {
  double v = 1.0;
  for (int a = 0; a < 3; ++a) v *= std::max(0.0, max[a] - min[a]);
  return v;
}

bool AABB3::contains(const std::array<double, 3>& p) const {
  for (int a = 0; a < 3; ++a)
    if (p[a] < min[a] || p[a] > max[a]) return false;
  return true;
}

AABB3 box_to_aabb(const BBox3D& box) {
  box.validate();
  const double c = std::abs(std::cos(box.yaw));
  const double s = std::abs(std::sin(box.yaw));
  const double w = box.size[0], l = box.size[1], h = box.size[2];
  const double ex = 0.5 * (l * c + w * s);
  const double ey = 0.5 * (l * s + w * c);
  AABB3 out;
  out.min = {box.center[0] - ex, box.center[1] - ey, box.center[2] - 0.5 * h};
  out.max = {box.center[0] + ex, box.center[1] + ey, box.center[2] + 0.5 * h};
  return out;
}

double intersection_volume(const AABB3& a, const AABB3& b) {
  double v = 1.0;
  for (int ax = 0; ax < 3; ++ax) {
    const double lo = std::max(a.min[ax], b.min[ax]);
    const double hi = std::min(a.max[ax], b.max[ax]);
    if (hi <= lo) return 0.0;
    v *= hi - lo;
  }
  return v;
}

AABB3 enclosing(const AABB3& a, const AABB3& b) {
  AABB3 out;
  for (int ax = 0; ax < 3; ++ax) {
    out.min[ax] = std::min(a.min[ax], b.min[ax]);
    out.max[ax] = std::max(a.max[ax], b.max[ax]);
  }
  return out;
}

double iou_aabb(const AABB3& a, const AABB3& b) {
  const double va = a.volume(), vb = b.volume();
  if (va <= 0.0 || vb <= 0.0) throw ValidationError("iou_aabb: degenerate box");
  const double inter = intersection_volume(a, b);
  return inter / (va + vb - inter);
}

double giou_aabb(const AABB3& a, const AABB3& b) {
  const double va = a.volume(), vb = b.volume();
  if (va <= 0.0 || vb <= 0.0) throw ValidationError("giou_aabb: degenerate box");
  const double inter = intersection_volume(a, b);
  const double uni = va + vb - inter;
  const double hull = enclosing(a, b).volume();
  return inter / uni - (hull - uni) / hull;
}

double bev_center_distance(const BBox3D& a, const BBox3D& b) {
  const double dx = a.center[0] - b.center[0];
  const double dy = a.center[1] - b.center[1];
  return std::hypot(dx, dy);
}

BBox3D transform_box(const BBox3D& box, const RigidTransform& t) {
  BBox3D out = box;
  out.center = t.apply_point(box.center);
  const std::array<double, 3> hd{std::cos(box.yaw), std::sin(box.yaw), 0.0};
  const auto r = t.apply_vector(hd);
  out.yaw = normalize_yaw(std::atan2(r[1], r[0]));
  return out;
}

}  // namespace lmot::geom
