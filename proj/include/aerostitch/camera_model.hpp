#pragma once

#include <algorithm>
#include <cmath>
#include <iterator>
#include <map>
#include <numbers>
#include <sstream>
#include <string>

#include "aerostitch/error.hpp"
#include "aerostitch/geometry.hpp"
#include "aerostitch/text.hpp"

namespace aerostitch {

/// Pinhole intrinsics plus the image size they apply to.
struct CameraIntrinsics {
  double fx = 800.0;
  double fy = 800.0;
  double cx = 320.0;
  double cy = 240.0;
  double skew = 0.0;
  double width = 640.0;
  double height = 480.0;

  void validate() const {
    if (!(std::isfinite(fx) && std::isfinite(fy) && std::isfinite(cx) && std::isfinite(cy) &&
          std::isfinite(skew) && std::isfinite(width) && std::isfinite(height))) {
      throw Error(ErrorCode::NonFiniteInput, "camera intrinsics");
    }
    if (!(fx > 0.0 && fy > 0.0)) throw Error(ErrorCode::InvalidConfig, "focal lengths must be > 0");
    if (!(cx >= 0.0 && cx <= width && cy >= 0.0 && cy <= height)) {
      throw Error(ErrorCode::InvalidConfig, "principal point outside the image");
    }
  }

  Matrix3 as_matrix() const {
    Matrix3 k;
    k << fx, skew, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
  }

  static CameraIntrinsics centered(double f, int w, int h) {
    return {f, f, w / 2.0, h / 2.0, 0.0, static_cast<double>(w), static_cast<double>(h)};
  }

  friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;
};

/// Altitude scale factor between two captures: (h_k1 / h_k) * (f / f_k).
inline double scale_factor(double h_k, double h_k1, double f, double f_k) {
  if (!(h_k > 0.0) || !(f_k > 0.0)) {
    throw Error(ErrorCode::DegenerateScale, "scale_factor needs h_k > 0 and f_k > 0");
  }
  return (h_k1 / h_k) * (f / f_k);
}

/// Constant-focal-length form.
inline double scale_factor(double h_k, double h_k1) { return scale_factor(h_k, h_k1, 1.0, 1.0); }

/// diag(s, s, 1) * K. Scaling all of K would be a projective no-op, so only
/// the first two rows are scaled.
inline CameraIntrinsics rescale_intrinsics(const CameraIntrinsics& k, double s) {
  if (!(s > 0.0) || !std::isfinite(s)) {
    throw Error(ErrorCode::DegenerateScale, "rescale factor must be positive");
  }
  CameraIntrinsics out = k;
  out.fx *= s;
  out.fy *= s;
  out.cx *= s;
  out.cy *= s;
  out.skew *= s;
  out.width *= s;
  out.height *= s;
  return out;
}

/// Rotation about the optical (z) axis by delta_yaw.
inline Matrix3 yaw_rotation(double delta_yaw) { return rotation_z(delta_yaw); }

inline constexpr double shear_limit = std::numbers::pi / 2.0 - 1e-6;

/// Pitch skew correction [[1,0,0],[tan(mu),1,0],[0,0,1]].
inline Matrix3 pitch_shear(double mu) {
  if (!std::isfinite(mu) || std::abs(mu) >= shear_limit) {
    throw Error(ErrorCode::ShearSingularity, "pitch " + std::to_string(mu) + " rad is too steep");
  }
  Matrix3 s = Matrix3::Identity();
  s(1, 0) = std::tan(mu);
  return s;
}

/// K * A * K^-1: applies a normalized-coordinate correction A to pixels that
/// were already projected with K.
inline Matrix3 image_correction_homography(const CameraIntrinsics& k, const Matrix3& a) {
  if (!a.allFinite() || std::abs(a.determinant()) < 1e-12) {
    throw Error(ErrorCode::SingularCorrection, "correction matrix is singular");
  }
  const Matrix3 km = k.as_matrix();
  return km * a * km.inverse();
}

/// Nadir ground displacement (camera axes, meters) to pixel shift.
inline Vec2 metric_to_pixel(const Vec3& displacement, double altitude, const CameraIntrinsics& k) {
  if (!(altitude > 0.0)) throw Error(ErrorCode::DegenerateScale, "altitude must be > 0");
  return {k.fx * displacement.x() / altitude, k.fy * displacement.y() / altitude};
}

// ---------------------------------------------------------------------------
// Calibration file: `key=value` lines, keys fx fy cx cy skew width height.
// Blank lines and lines starting with '#' are ignored.

inline CameraIntrinsics parse_calibration(const std::string& contents) {
  std::map<std::string, double, std::less<>> values;
  std::istringstream in(contents);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = text::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::ParseError, text::located("expected key=value", line_no));
    }
    const std::string key(text::trim(body.substr(0, eq)));
    static const char* known[] = {"fx", "fy", "cx", "cy", "skew", "width", "height"};
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
      throw Error(ErrorCode::ParseError, text::located("unknown key '" + key + "'", line_no));
    }
    if (values.count(key)) {
      throw Error(ErrorCode::ParseError, text::located("duplicate key '" + key + "'", line_no));
    }
    values[key] = text::parse_double(body.substr(eq + 1), line_no);
  }
  for (const char* required : {"fx", "fy", "cx", "cy", "width", "height"}) {
    if (!values.count(required)) {
      throw Error(ErrorCode::ParseError, std::string("missing key '") + required + "'");
    }
  }
  CameraIntrinsics k{values["fx"], values["fy"], values["cx"], values["cy"],
                     values.count("skew") ? values["skew"] : 0.0, values["width"],
                     values["height"]};
  k.validate();
  return k;
}

inline std::string format_calibration(const CameraIntrinsics& k) {
  std::string out;
  out += "fx=" + text::format_double(k.fx) + "\n";
  out += "fy=" + text::format_double(k.fy) + "\n";
  out += "cx=" + text::format_double(k.cx) + "\n";
  out += "cy=" + text::format_double(k.cy) + "\n";
  out += "skew=" + text::format_double(k.skew) + "\n";
  out += "width=" + text::format_double(k.width) + "\n";
  out += "height=" + text::format_double(k.height) + "\n";
  return out;
}

}  // namespace aerostitch
