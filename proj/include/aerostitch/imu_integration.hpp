#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "aerostitch/error.hpp"
#include "aerostitch/geometry.hpp"
#include "aerostitch/text.hpp"

namespace aerostitch {

/// One inertial record. accel_body is the accelerometer specific force in
/// the body frame; altitude comes from the altimeter channel.
struct ImuSample {
  double t = 0.0;
  Vec3 accel_body = Vec3::Zero();
  Attitude attitude;
  double altitude = 0.0;
};

/// Checks the per-sample invariants and wraps yaw into (-pi, pi].
inline ImuSample validated(ImuSample s) {
  if (!std::isfinite(s.t) || !s.accel_body.allFinite() || !s.attitude.finite() ||
      !std::isfinite(s.altitude)) {
    throw Error(ErrorCode::NonFiniteInput, "IMU sample at t=" + std::to_string(s.t));
  }
  if (s.altitude < 0.0) {
    throw Error(ErrorCode::InvalidConfig, "negative altitude at t=" + std::to_string(s.t));
  }
  s.attitude.yaw = normalize_angle(s.attitude.yaw);
  return s;
}

/// Position and attitude at an instant. The ground plane is z = 0, so the
/// altitude is the z component of the position by construction.
class PoseEstimate {
 public:
  PoseEstimate() = default;
  PoseEstimate(double t, const Vec3& position, const Attitude& attitude)
      : t_(t), position_(position), attitude_(attitude) {}

  double t() const { return t_; }
  const Vec3& position() const { return position_; }
  const Attitude& attitude() const { return attitude_; }
  double altitude() const { return position_.z(); }

  PoseEstimate with_altitude(double altitude) const {
    Vec3 p = position_;
    p.z() = altitude;
    return {t_, p, attitude_};
  }

 private:
  double t_ = 0.0;
  Vec3 position_ = Vec3::Zero();
  Attitude attitude_;
};

enum class IntegrationMethod { trapezoid, simpson };

struct IntegrationConfig {
  IntegrationMethod method = IntegrationMethod::trapezoid;
  /// Physical gravity vector in the world (ENU) frame.
  Vec3 gravity{0.0, 0.0, -9.81};
  /// Velocity at the first log sample.
  Vec3 initial_velocity = Vec3::Zero();
  bool allow_any_gravity = false;

  void validate() const {
    if (!gravity.allFinite() || !initial_velocity.allFinite()) {
      throw Error(ErrorCode::NonFiniteInput, "integration config");
    }
    const double g = gravity.norm();
    if (!allow_any_gravity && (g < 9.7 || g > 9.9)) {
      throw Error(ErrorCode::InvalidConfig,
                  "gravity magnitude " + std::to_string(g) + " outside [9.7, 9.9]");
    }
  }
};

/// Velocity and position series aligned with the input timestamps.
struct IntegratedTrack {
  std::vector<double> t;
  std::vector<Vec3> velocity;
  std::vector<Vec3> position;
};

namespace detail {

inline void check_time_axis(std::span<const double> t) {
  if (t.size() < 2) {
    throw Error(ErrorCode::InsufficientSamples,
                "need at least 2 samples, got " + std::to_string(t.size()));
  }
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (!(t[i] > t[i - 1])) {
      throw Error(ErrorCode::NonMonotoneTime, "t[" + std::to_string(i) + "] = " +
                                                  std::to_string(t[i]) + " does not increase");
    }
  }
}

inline std::vector<Vec3> cumulative_trapezoid(std::span<const double> t, std::span<const Vec3> f,
                                              const Vec3& initial) {
  std::vector<Vec3> out(t.size());
  out[0] = initial;
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    out[i + 1] = out[i] + 0.5 * (t[i + 1] - t[i]) * (f[i] + f[i + 1]);
  }
  return out;
}

// Composite Simpson at even nodes. Odd nodes add a partial panel with a
// cubic-exact 4-point rule so every node is exact for cubic integrands.
inline std::vector<Vec3> cumulative_simpson(double h, std::span<const Vec3> f,
                                            const Vec3& initial) {
  const std::size_t n = f.size();
  std::vector<Vec3> out(n);
  out[0] = initial;
  for (std::size_t k = 0; k + 2 < n; k += 2) {
    out[k + 2] = out[k] + (h / 3.0) * (f[k] + 4.0 * f[k + 1] + f[k + 2]);
  }
  for (std::size_t k = 0; k + 1 < n; k += 2) {
    Vec3 partial;
    if (k + 3 < n) {
      partial = (h / 24.0) * (9.0 * f[k] + 19.0 * f[k + 1] - 5.0 * f[k + 2] + f[k + 3]);
    } else if (k >= 1) {
      partial = (h / 24.0) * (-f[k - 1] + 13.0 * f[k] + 13.0 * f[k + 1] - f[k + 2]);
    } else {
      partial = (h / 12.0) * (5.0 * f[k] + 8.0 * f[k + 1] - f[k + 2]);
    }
    out[k + 1] = out[k] + partial;
  }
  return out;
}

}  // namespace detail

/// Double trapezoidal integration of world-frame acceleration.
inline IntegratedTrack integrate_trapezoid(std::span<const double> t, std::span<const Vec3> accel,
                                           const Vec3& v0, const Vec3& x0) {
  detail::check_time_axis(t);
  IntegratedTrack track;
  track.t.assign(t.begin(), t.end());
  track.velocity = detail::cumulative_trapezoid(t, accel, v0);
  track.position = detail::cumulative_trapezoid(t, track.velocity, x0);
  return track;
}

/// Double composite-Simpson integration. Requires an odd sample count on a
/// uniform grid.
inline IntegratedTrack integrate_simpson(std::span<const double> t, std::span<const Vec3> accel,
                                         const Vec3& v0, const Vec3& x0) {
  detail::check_time_axis(t);
  if (t.size() % 2 == 0) {
    throw Error(ErrorCode::SimpsonParity,
                "Simpson needs an odd sample count, got " + std::to_string(t.size()));
  }
  const double h = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
  for (std::size_t i = 1; i < t.size(); ++i) {
    const double dt = t[i] - t[i - 1];
    if (std::abs(dt - h) > 1e-9 * std::abs(h)) {
      throw Error(ErrorCode::NonUniformGrid, "step " + std::to_string(i) + " is " +
                                                 std::to_string(dt) + ", expected " +
                                                 std::to_string(h));
    }
  }
  IntegratedTrack track;
  track.t.assign(t.begin(), t.end());
  track.velocity = detail::cumulative_simpson(h, accel, v0);
  track.position = detail::cumulative_simpson(h, track.velocity, x0);
  return track;
}

namespace detail {
inline void unpack(std::span<const ImuSample> samples, std::vector<double>& t,
                   std::vector<Vec3>& a) {
  t.reserve(samples.size());
  a.reserve(samples.size());
  for (const auto& s : samples) {
    t.push_back(s.t);
    a.push_back(s.accel_body);
  }
}
}  // namespace detail

/// Overloads taking samples whose accel_body already holds world-frame,
/// gravity-free acceleration.
inline IntegratedTrack integrate_trapezoid(std::span<const ImuSample> samples, const Vec3& v0,
                                           const Vec3& x0) {
  std::vector<double> t;
  std::vector<Vec3> a;
  detail::unpack(samples, t, a);
  return integrate_trapezoid(t, a, v0, x0);
}

inline IntegratedTrack integrate_simpson(std::span<const ImuSample> samples, const Vec3& v0,
                                         const Vec3& x0) {
  std::vector<double> t;
  std::vector<Vec3> a;
  detail::unpack(samples, t, a);
  return integrate_simpson(t, a, v0, x0);
}

/// World-frame kinematic acceleration: R(roll, pitch, yaw) * accel_body - gravity,
/// where `gravity` is the specific force read at rest (+9.81 along +z in ENU).
inline Vec3 rotate_to_world(const ImuSample& sample, const Vec3& gravity) {
  if (!sample.accel_body.allFinite() || !sample.attitude.finite() || !gravity.allFinite()) {
    throw Error(ErrorCode::NonFiniteInput, "rotate_to_world at t=" + std::to_string(sample.t));
  }
  return body_to_world(sample.attitude) * sample.accel_body - gravity;
}

/// Dead-reckons the log from `initial` (the pose at the first sample) and
/// samples the result at each capture time. Position is linearly
/// interpolated; attitude and altitude come from the nearest sample, and the
/// measured altitude replaces the integrated z.
inline std::vector<PoseEstimate> poses_at_captures(std::span<const ImuSample> log,
                                                   std::span<const double> capture_times,
                                                   const PoseEstimate& initial,
                                                   const IntegrationConfig& cfg) {
  cfg.validate();
  std::vector<double> t;
  std::vector<Vec3> a;
  t.reserve(log.size());
  a.reserve(log.size());
  const Vec3 rest_force = -cfg.gravity;
  for (const auto& s : log) {
    t.push_back(s.t);
    a.push_back(rotate_to_world(s, rest_force));
  }
  const IntegratedTrack track =
      cfg.method == IntegrationMethod::simpson
          ? integrate_simpson(t, a, cfg.initial_velocity, initial.position())
          : integrate_trapezoid(t, a, cfg.initial_velocity, initial.position());

  std::vector<PoseEstimate> poses;
  poses.reserve(capture_times.size());
  for (const double c : capture_times) {
    if (!(c >= t.front() && c <= t.back())) {
      throw Error(ErrorCode::OutOfRange, "capture time " + std::to_string(c) +
                                             " outside log span [" + std::to_string(t.front()) +
                                             ", " + std::to_string(t.back()) + "]");
    }
    auto upper = std::upper_bound(t.begin(), t.end(), c);
    std::size_t hi = std::min<std::size_t>(static_cast<std::size_t>(upper - t.begin()), t.size() - 1);
    std::size_t lo = hi - 1;
    const double alpha = (c - t[lo]) / (t[hi] - t[lo]);
    Vec3 position = (1.0 - alpha) * track.position[lo] + alpha * track.position[hi];
    const std::size_t nearest = alpha <= 0.5 ? lo : hi;
    position.z() = log[nearest].altitude;
    poses.emplace_back(c, position, log[nearest].attitude);
  }
  return poses;
}

// ---------------------------------------------------------------------------
// IMU log CSV: header `t,ax,ay,az,roll,pitch,yaw,alt`.

inline constexpr std::string_view imu_csv_header = "t,ax,ay,az,roll,pitch,yaw,alt";

inline std::vector<ImuSample> read_imu_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "empty IMU log");
  ++line_no;
  if (text::trim(line) != imu_csv_header) {
    throw Error(ErrorCode::ParseError,
                text::located("expected header '" + std::string(imu_csv_header) + "'", line_no));
  }
  std::vector<ImuSample> samples;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto fields = text::split(line, ',');
    if (fields.size() != 8) {
      throw Error(ErrorCode::ParseError,
                  text::located("expected 8 columns, got " + std::to_string(fields.size()), line_no));
    }
    double v[8];
    for (std::size_t i = 0; i < 8; ++i) v[i] = text::parse_double(fields[i], line_no);
    ImuSample s;
    s.t = v[0];
    s.accel_body = Vec3(v[1], v[2], v[3]);
    s.attitude = {v[4], v[5], v[6]};
    s.altitude = v[7];
    try {
      s = validated(s);
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, text::located(e.what(), line_no));
    }
    if (!samples.empty() && !(s.t > samples.back().t)) {
      throw Error(ErrorCode::ParseError, text::located("non-monotone timestamp", line_no));
    }
    samples.push_back(s);
  }
  return samples;
}

inline std::vector<ImuSample> read_imu_csv(const std::string& path) {
  std::istringstream in(text::read_file(path));
  return read_imu_csv(in);
}

inline void write_imu_csv(std::ostream& out, std::span<const ImuSample> samples) {
  out << imu_csv_header << '\n';
  for (const auto& s : samples) {
    out << text::format_double(s.t) << ',' << text::format_double(s.accel_body.x()) << ','
        << text::format_double(s.accel_body.y()) << ',' << text::format_double(s.accel_body.z())
        << ',' << text::format_double(s.attitude.roll) << ','
        << text::format_double(s.attitude.pitch) << ',' << text::format_double(s.attitude.yaw)
        << ',' << text::format_double(s.altitude) << '\n';
  }
}

}  // namespace aerostitch
