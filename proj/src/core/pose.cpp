// SPDX-License-Identifier: Apache-2.0
#include "lmot/core/pose.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "lmot/common.hpp"

namespace lmot {

namespace {

Eigen::Map<const Eigen::Matrix<double, 4, 4, Eigen::RowMajor>> as_eigen(
    const std::array<double, 16>& m) {
  return Eigen::Map<const Eigen::Matrix<double, 4, 4, Eigen::RowMajor>>(m.data());
}

}  // namespace

RigidTransform::RigidTransform()
    : m_{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1} {}

RigidTransform::RigidTransform(const std::array<double, 16>& row_major) : m_(row_major) {}

RigidTransform RigidTransform::identity() { return RigidTransform(); }

RigidTransform RigidTransform::translation(double x, double y, double z) {
  RigidTransform t;
  t.m_[3] = x;
  t.m_[7] = y;
  t.m_[11] = z;
  return t;
}

RigidTransform RigidTransform::planar(double yaw, double x, double y, double z) {
  RigidTransform t;
  const double c = std::cos(yaw), s = std::sin(yaw);
  t.m_[0] = c;
  t.m_[1] = -s;
  t.m_[4] = s;
  t.m_[5] = c;
  t.m_[3] = x;
  t.m_[7] = y;
  t.m_[11] = z;
  return t;
}

bool RigidTransform::is_rigid(double tol) const {
  auto m = as_eigen(m_);
  for (int i = 0; i < 16; ++i)
    if (!std::isfinite(m_[static_cast<std::size_t>(i)])) return false;
  if (std::abs(m(3, 0)) > tol || std::abs(m(3, 1)) > tol || std::abs(m(3, 2)) > tol ||
      std::abs(m(3, 3) - 1.0) > tol)
    return false;
  Eigen::Matrix3d r = m.topLeftCorner<3, 3>();
  if (((r * r.transpose()) - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(r.determinant() - 1.0) <= tol;
}

void RigidTransform::validate_rigid(double tol) const {
  if (!is_rigid(tol)) throw ValidationError("RigidTransform: matrix is not a rigid transform");
}

std::array<double, 3> RigidTransform::apply_point(const std::array<double, 3>& p) const {
  const auto& m = m_;
  return {m[0] * p[0] + m[1] * p[1] + m[2] * p[2] + m[3],
          m[4] * p[0] + m[5] * p[1] + m[6] * p[2] + m[7],
          m[8] * p[0] + m[9] * p[1] + m[10] * p[2] + m[11]};
}

std::array<double, 3> RigidTransform::apply_vector(const std::array<double, 3>& v) const {
  const auto& m = m_;
  return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
          m[4] * v[0] + m[5] * v[1] + m[6] * v[2],
          m[8] * v[0] + m[9] * v[1] + m[10] * v[2]};
}

double RigidTransform::heading() const {
  // Heading of the rotated +x axis projected into the xy plane.
  return std::atan2(m_[4], m_[0]);
}

RigidTransform RigidTransform::inverse() const {
  auto m = as_eigen(m_);
  Eigen::Matrix3d r = m.topLeftCorner<3, 3>();
  Eigen::Vector3d t = m.topRightCorner<3, 1>();
  Eigen::Matrix3d ri = r.transpose();
  Eigen::Vector3d ti = -(ri * t);
  RigidTransform out = identity();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) out.m_[static_cast<std::size_t>(i * 4 + j)] = ri(i, j);
    out.m_[static_cast<std::size_t>(i * 4 + 3)] = ti(i);
  }
  return out;
}

RigidTransform RigidTransform::operator*(const RigidTransform& rhs) const {
  Eigen::Matrix<double, 4, 4, Eigen::RowMajor> prod = as_eigen(m_) * as_eigen(rhs.m_);
  RigidTransform out;
  Eigen::Map<Eigen::Matrix<double, 4, 4, Eigen::RowMajor>>(out.m_.data()) = prod;
  return out;
}

}  // namespace lmot
