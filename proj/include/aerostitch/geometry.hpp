#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "aerostitch/error.hpp"

namespace aerostitch {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Matrix3 = Eigen::Matrix3d;

/// Roll, pitch, yaw in radians. Composed as ZYX intrinsic (yaw, then pitch,
/// then roll), body to world.
struct Attitude {
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;

  bool finite() const { return std::isfinite(roll) && std::isfinite(pitch) && std::isfinite(yaw); }
};

/// Wraps an angle into (-pi, pi].
inline double normalize_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::remainder(a, two_pi);
  if (r <= -std::numbers::pi) r += two_pi;
  return r;
}

inline Matrix3 rotation_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Matrix3 r;
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return r;
}

inline Matrix3 rotation_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Matrix3 r;
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}

inline Matrix3 rotation_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Matrix3 r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

/// Body-to-world rotation R = Rz(yaw) * Ry(pitch) * Rx(roll).
inline Matrix3 body_to_world(const Attitude& att) {
  return rotation_z(att.yaw) * rotation_y(att.pitch) * rotation_x(att.roll);
}

inline bool all_finite(const Matrix3& m) { return m.allFinite(); }

inline double max_abs_diff(const Matrix3& a, const Matrix3& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace aerostitch
