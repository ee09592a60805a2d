// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>

namespace lmot {

// Rigid transform stored as a row-major 4x4 homogeneous matrix.
class RigidTransform {
 public:
  RigidTransform();  // identity
  explicit RigidTransform(const std::array<double, 16>& row_major);

  static RigidTransform identity();
  static RigidTransform translation(double x, double y, double z);
  // Planar rotation about +z by yaw, then translation.
  static RigidTransform planar(double yaw, double x, double y, double z = 0.0);

  const std::array<double, 16>& matrix() const { return m_; }

  // Rotation orthonormal with det +1 and affine bottom row, within tol.
  bool is_rigid(double tol = 1e-6) const;
  void validate_rigid(double tol = 1e-6) const;  // throws ValidationError

  std::array<double, 3> apply_point(const std::array<double, 3>& p) const;
  std::array<double, 3> apply_vector(const std::array<double, 3>& v) const;

  // Heading of the rotated +x axis projected into the xy plane.
  double heading() const;

  RigidTransform inverse() const;
  RigidTransform operator*(const RigidTransform& rhs) const;

 private:
  std::array<double, 16> m_;
};

}  // namespace lmot
