#pragma once

#include <array>
#include <cmath>
#include <span>
#include <string>

#include <Eigen/LU>

#include "aerostitch/camera_model.hpp"
#include "aerostitch/error.hpp"
#include "aerostitch/geometry.hpp"
#include "aerostitch/imu_integration.hpp"

namespace aerostitch {

/// Invertible 3x3 projective map, scaled so the bottom-right entry is 1
/// whenever that entry is not ~0.
class Homography {
 public:
  Homography() : m_(Matrix3::Identity()) {}

  explicit Homography(const Matrix3& m) : m_(m) {
    if (!m_.allFinite()) throw Error(ErrorCode::SingularCorrection, "non-finite homography");
    if (std::abs(m_(2, 2)) > 1e-12) m_ /= m_(2, 2);
    if (std::abs(m_.determinant()) <= 1e-12) {
      throw Error(ErrorCode::SingularCorrection, "homography is singular");
    }
  }

  static Homography identity() { return {}; }

  static Homography translation(double tx, double ty) {
    Matrix3 m = Matrix3::Identity();
    m(0, 2) = tx;
    m(1, 2) = ty;
    return Homography(m);
  }

  const Matrix3& matrix() const { return m_; }
  double operator()(int r, int c) const { return m_(r, c); }

  Homography inverse() const { return Homography(m_.inverse()); }

  Homography operator*(const Homography& rhs) const { return Homography(m_ * rhs.m_); }

  Vec3 apply_homogeneous(const Vec3& p) const { return m_ * p; }

  Vec2 apply(const Vec2& p) const {
    const Vec3 q = m_ * Vec3(p.x(), p.y(), 1.0);
    if (std::abs(q.z()) < 1e-12) throw Error(ErrorCode::PointAtInfinity, "point maps to infinity");
    return q.head<2>() / q.z();
  }

 private:
  Matrix3 m_;
};

/// Q = [R | t]: rotation and translation from frame k to frame k+1.
struct RigidTransform {
  Matrix3 rotation = Matrix3::Identity();
  Vec3 translation = Vec3::Zero();
  /// Body-to-world rotation of the frame `translation` is expressed in.
  Matrix3 frame = Matrix3::Identity();

  bool valid(double tol = 1e-9) const {
    const double ortho = (rotation.transpose() * rotation - Matrix3::Identity()).cwiseAbs().maxCoeff();
    return ortho < tol && std::abs(rotation.determinant() - 1.0) <= tol && translation.allFinite();
  }
};

/// Relative motion between two poses: R = R1 * R0^T, t = R0^T (p1 - p0).
inline RigidTransform relative_rigid(const PoseEstimate& pose_k, const PoseEstimate& pose_k1) {
  const Matrix3 r0 = body_to_world(pose_k.attitude());
  const Matrix3 r1 = body_to_world(pose_k1.attitude());
  return {r1 * r0.transpose(), r0.transpose() * (pose_k1.position() - pose_k.position()), r0};
}

/// relative(a, b) followed by relative(b, c) gives relative(a, c).
inline RigidTransform compose(const RigidTransform& ab, const RigidTransform& bc) {
  return {bc.rotation * ab.rotation, ab.translation + ab.frame.transpose() * bc.frame * bc.translation, ab.frame};
}

struct ProjectionOptions {
  /// Roll is not one of the corrected axes; zeroing it gives the strict
  /// yaw/pitch-only model.
  bool use_roll = true;
};

/// Ground-plane (x, y, 1) meters to pixel homography of the camera at `pose`:
///   M = K * S(pitch) * Rz(yaw) * [r1 r2 t]
/// where [r1 r2 t] is the extrinsic of a downward-looking camera at the pose
/// position (image x east, image y south at zero yaw), rolled about the
/// body x axis.
inline Homography frame_projection(const PoseEstimate& pose, const CameraIntrinsics& k,
                                   const ProjectionOptions& options = {}) {
  if (!(pose.altitude() > 0.0)) {
    throw Error(ErrorCode::DegenerateScale, "altitude must be > 0 for a ground projection");
  }
  const Attitude& att = pose.attitude();
  if (!att.finite() || !pose.position().allFinite()) {
    throw Error(ErrorCode::NonFiniteInput, "pose");
  }
  const double roll = options.use_roll ? att.roll : 0.0;
  if (std::abs(roll) >= shear_limit) {
    throw Error(ErrorCode::ShearSingularity, "roll " + std::to_string(roll) + " rad is too steep");
  }
  const Matrix3 mount = Eigen::Vector3d(1.0, -1.0, -1.0).asDiagonal();
  const Matrix3 world_to_camera = mount * rotation_x(roll).transpose();
  Matrix3 extrinsic;
  extrinsic.col(0) = world_to_camera.col(0);
  extrinsic.col(1) = world_to_camera.col(1);
  extrinsic.col(2) = -world_to_camera * pose.position();
  const Matrix3 corrected = k.as_matrix() * pitch_shear(att.pitch) * yaw_rotation(att.yaw);
  return Homography(corrected * extrinsic);
}

/// T = M_{k+1} * M_k^-1: maps pixels of frame k into frame k+1 through the
/// ground plane. Each M carries its own altitude, yaw and pitch corrections.
inline Homography frame_to_frame(const PoseEstimate& pose_k, const PoseEstimate& pose_k1,
                                 const CameraIntrinsics& k_k, const CameraIntrinsics& k_k1,
                                 const ProjectionOptions& options = {}) {
  return frame_projection(pose_k1, k_k1, options) * frame_projection(pose_k, k_k, options).inverse();
}

inline Homography frame_to_frame(const PoseEstimate& pose_k, const PoseEstimate& pose_k1,
                                 const CameraIntrinsics& k, const ProjectionOptions& options = {}) {
  return frame_to_frame(pose_k, pose_k1, k, k, options);
}

/// Image corners (0,0), (m,0), (m,n), (0,n) after mapping, dehomogenized.
struct CornerSet {
  std::array<Vec3, 4> points;
};

inline CornerSet image_corners(double width, double height) {
  return {{Vec3(0, 0, 1), Vec3(width, 0, 1), Vec3(width, height, 1), Vec3(0, height, 1)}};
}

inline CornerSet map_corners(const Homography& h, double width, double height) {
  CornerSet out = image_corners(width, height);
  for (auto& p : out.points) {
    const Vec3 q = h.apply_homogeneous(p);
    if (std::abs(q.z()) < 1e-12) {
      throw Error(ErrorCode::PointAtInfinity, "image corner maps to infinity");
    }
    p = q / q.z();
  }
  return out;
}

/// Ordered product H_01 * H_12 * ... ; identity for an empty list.
inline Homography chain(std::span<const Homography> homographies) {
  if (homographies.empty()) return Homography::identity();
  Homography out = homographies.front();
  for (std::size_t i = 1; i < homographies.size(); ++i) out = out * homographies[i];
  return out;
}

struct CornerError {
  double mean = 0.0;
  double max = 0.0;
};

/// Distance between the image corners mapped by an estimate and by the truth.
inline CornerError corner_reprojection_error(const Homography& estimate, const Homography& truth,
                                             double width, double height) {
  const CornerSet a = map_corners(estimate, width, height);
  const CornerSet b = map_corners(truth, width, height);
  CornerError e;
  for (std::size_t i = 0; i < 4; ++i) {
    const double d = (a.points[i] - b.points[i]).head<2>().norm();
    e.mean += d / 4.0;
    e.max = std::max(e.max, d);
  }
  return e;
}

}  // namespace aerostitch
