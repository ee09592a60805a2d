// SPDX-License-Identifier: Apache-2.0
#include "lmot/core/types.hpp"

#include <cmath>
#include <limits>

#include "lmot/common.hpp"

namespace lmot {

double normalize_yaw(double yaw) {
  if (!std::isfinite(yaw)) throw NumericError("normalize_yaw: non-finite yaw");
  double r = std::remainder(yaw, 2.0 * M_PI);  // lands in [-pi, pi]
  if (r <= -M_PI) r = M_PI;                    // map -pi to +pi: range (-pi, pi]
  return r;
}

ClassTable::ClassTable()
    : ClassTable(std::vector<std::string>{"bicycle", "bus", "car", "motorcycle",
                                          "pedestrian", "trailer", "truck"}) {}

ClassTable::ClassTable(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.empty()) throw ValidationError("ClassTable: empty class list");
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i].empty()) throw ValidationError("ClassTable: empty class name");
    for (std::size_t j = 0; j < i; ++j)
      if (names_[j] == names_[i])
        throw ValidationError("ClassTable: duplicate class name '" + names_[i] + "'");
  }
}

int ClassTable::id_of(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return static_cast<int>(i);
  throw ValidationError("ClassTable: unknown class '" + name + "'");
}

const std::string& ClassTable::name_of(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= names_.size())
    throw ValidationError("ClassTable: class id out of range");
  return names_[static_cast<std::size_t>(id)];
}

void BBox3D::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (!std::isfinite(center[a])) throw ValidationError("BBox3D: non-finite center");
    if (!std::isfinite(size[a]) || size[a] <= 0.0)
      throw ValidationError("BBox3D: size must be finite and positive");
  }
  if (!std::isfinite(yaw)) throw ValidationError("BBox3D: non-finite yaw");
}

void Detection::validate(const ClassTable& classes) const {
  box.validate();
  if (class_id < 0 || static_cast<std::size_t>(class_id) >= classes.size())
    throw ValidationError("Detection: class id out of range");
  if (!std::isfinite(score) || score < 0.0 || score > 1.0)
    throw ValidationError("Detection: score must lie in [0, 1]");
}

GroundTruthObject GroundTruthObject::null_object() {
  GroundTruthObject o;
  o.box.center = {0.0, 0.0, 0.0};
  o.box.size = {1.0, 1.0, 1.0};
  o.box.yaw = 0.0;
  o.class_id = 0;
  o.instance_id = -1;
  o.is_null = true;
  return o;
}

void FrameSequence::validate() const {
  if (frames.empty()) throw ValidationError("FrameSequence: no frames");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].frame_idx != static_cast<int>(i))
      throw ValidationError("FrameSequence: frame indices must be 0-based and contiguous");
    if (i > 0 && frames[i].timestamp_us <= frames[i - 1].timestamp_us)
      throw ValidationError("FrameSequence: timestamps must be strictly increasing");
    frames[i].ego_pose.validate_rigid();
  }
}

}  // namespace lmot
