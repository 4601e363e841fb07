#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "aerostitch/camera_model.hpp"
#include "aerostitch/error.hpp"
#include "aerostitch/geometry.hpp"
#include "aerostitch/image.hpp"
#include "aerostitch/imu_integration.hpp"
#include "aerostitch/text.hpp"
#include "aerostitch/transform_pipeline.hpp"
#include "aerostitch/warp_compose.hpp"

namespace aerostitch {

// ---------------------------------------------------------------------------
// Orthophoto textures

inline ImageBuffer checkerboard(int width, int height, int cell, double dark = 0.0,
                                double light = 1.0) {
  ImageBuffer img(width, height, 1);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) img.set(x, y, 0, ((x / cell + y / cell) % 2) ? light : dark);
  }
  return img;
}

struct NoiseOptions {
  int octaves = 5;
  /// Lattice spacing of the coarsest octave, in pixels.
  int base_cell = 64;
  /// When > 0 the texture repeats with this period (pixels); must be a
  /// multiple of base_cell.
  int period = 0;
};

namespace detail {

inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

}  // namespace detail

/// Seeded multi-octave value noise normalized to [0, 1].
inline ImageBuffer fractal_noise(int width, int height, std::uint64_t seed,
                                 const NoiseOptions& opts = {}) {
  if (opts.octaves < 1 || opts.base_cell < 2) throw Error(ErrorCode::InvalidConfig, "noise options");
  if (opts.period > 0 && opts.period % opts.base_cell != 0) {
    throw Error(ErrorCode::InvalidConfig, "noise period must be a multiple of base_cell");
  }
  std::mt19937_64 rng(seed);
  std::vector<double> field(static_cast<std::size_t>(width) * height, 0.0);
  double amplitude = 1.0;
  int cell = opts.base_cell;
  for (int octave = 0; octave < opts.octaves && cell >= 1; ++octave) {
    const int nx = opts.period > 0 ? opts.period / cell : width / cell + 2;
    const int ny = opts.period > 0 ? opts.period / cell : height / cell + 2;
    std::vector<double> lattice(static_cast<std::size_t>(nx) * ny);
    for (double& v : lattice) v = detail::unit_uniform(rng);
    auto node = [&](int i, int j) {
      return lattice[static_cast<std::size_t>(((j % ny) + ny) % ny) * nx + ((i % nx) + nx) % nx];
    };
    for (int y = 0; y < height; ++y) {
      const int j = y / cell;
      const double fy = detail::smoothstep(static_cast<double>(y % cell) / cell);
      for (int x = 0; x < width; ++x) {
        const int i = x / cell;
        const double fx = detail::smoothstep(static_cast<double>(x % cell) / cell);
        const double top = (1 - fx) * node(i, j) + fx * node(i + 1, j);
        const double bottom = (1 - fx) * node(i, j + 1) + fx * node(i + 1, j + 1);
        field[static_cast<std::size_t>(y) * width + x] += amplitude * ((1 - fy) * top + fy * bottom);
      }
    }
    amplitude *= 0.5;
    cell /= 2;
  }
  const auto [lo, hi] = std::minmax_element(field.begin(), field.end());
  const double lo_v = *lo, span = std::max(*hi - *lo, 1e-12);
  for (double& v : field) v = (v - lo_v) / span;
  return ImageBuffer(width, height, 1, std::move(field));
}

/// A ground texture and its scale. The texture is centered on the world
/// origin with image rows running north to south.
struct Orthophoto {
  ImageBuffer image;
  double meters_per_pixel = 0.05;

  Vec2 world_to_pixel(double x, double y) const {
    return {x / meters_per_pixel + image.width() / 2.0 - 0.5,
            image.height() / 2.0 - 0.5 - y / meters_per_pixel};
  }

  Vec2 pixel_to_world(double i, double j) const {
    return {(i + 0.5 - image.width() / 2.0) * meters_per_pixel,
            (image.height() / 2.0 - 0.5 - j) * meters_per_pixel};
  }
};

/// Renders the view of `pose` by back-projecting every pixel onto z = 0
/// through the same ground-to-image map the stitcher uses. Rays that miss the
/// orthophoto are black.
inline ImageBuffer render_view(const Orthophoto& ortho, const PoseEstimate& pose,
                               const CameraIntrinsics& k, const ProjectionOptions& options = {},
                               unsigned threads = 0) {
  k.validate();
  const Matrix3 back = frame_projection(pose, k, options).inverse().matrix();
  const int w = static_cast<int>(std::lround(k.width));
  const int h = static_cast<int>(std::lround(k.height));
  const int channels = ortho.image.channels();
  ImageBuffer out(w, h, channels);
  const double max_i = ortho.image.width() - 0.5, max_j = ortho.image.height() - 0.5;
  parallel_rows(h, threads, [&](int begin, int end) {
    for (int v = begin; v < end; ++v) {
      for (int u = 0; u < w; ++u) {
        const Vec3 g = back * Vec3(u, v, 1.0);
        if (g.z() <= 1e-12) continue;
        const Vec2 p = ortho.world_to_pixel(g.x() / g.z(), g.y() / g.z());
        if (p.x() < -0.5 || p.y() < -0.5 || p.x() > max_i || p.y() > max_j) continue;
        for (int c = 0; c < channels; ++c) out.set(u, v, c, sample_bilinear(ortho.image, p.x(), p.y(), c));
      }
    }
  });
  return out;
}

inline ImageBuffer render_view(const ImageBuffer& ortho, double meters_per_pixel,
                               const PoseEstimate& pose, const CameraIntrinsics& k) {
  return render_view(Orthophoto{ortho, meters_per_pixel}, pose, k);
}

// ---------------------------------------------------------------------------
// Flights

/// c[0] + c[1] t + c[2] t^2 + ...
struct Polynomial {
  std::vector<double> coefficients;

  double operator()(double t) const {
    double v = 0.0;
    for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) v = v * t + *it;
    return v;
  }

  Polynomial derivative() const {
    Polynomial d;
    for (std::size_t i = 1; i < coefficients.size(); ++i) {
      d.coefficients.push_back(static_cast<double>(i) * coefficients[i]);
    }
    return d;
  }

  friend bool operator==(const Polynomial&, const Polynomial&) = default;
};

struct NoiseSpec {
  double accel_sigma = 0.0;
  double attitude_sigma = 0.0;
  double altitude_sigma = 0.0;
  Vec3 accel_bias = Vec3::Zero();

  friend bool operator==(const NoiseSpec&, const NoiseSpec&) = default;
};

struct FlightSpec {
  std::array<Polynomial, 3> position{Polynomial{{0.0}}, Polynomial{{0.0}}, Polynomial{{20.0}}};
  Polynomial roll{{0.0}};
  Polynomial pitch{{0.0}};
  Polynomial yaw{{0.0}};
  std::vector<double> capture_times{0.0};
  double imu_rate = 200.0;
  double t_start = 0.0;
  double t_end = 1.0;
  NoiseSpec noise;
  CameraIntrinsics camera;
  double meters_per_pixel = 0.05;

  Vec3 position_at(double t) const { return {position[0](t), position[1](t), position[2](t)}; }
  Vec3 velocity_at(double t) const {
    return {position[0].derivative()(t), position[1].derivative()(t), position[2].derivative()(t)};
  }
  Vec3 acceleration_at(double t) const {
    return {position[0].derivative().derivative()(t), position[1].derivative().derivative()(t),
            position[2].derivative().derivative()(t)};
  }
  Attitude attitude_at(double t) const { return {roll(t), pitch(t), normalize_angle(yaw(t))}; }
  PoseEstimate pose_at(double t) const { return {t, position_at(t), attitude_at(t)}; }

  std::size_t sample_count() const {
    return static_cast<std::size_t>(std::floor((t_end - t_start) * imu_rate + 1e-6)) + 1;
  }
  double sample_time(std::size_t k) const { return t_start + static_cast<double>(k) / imu_rate; }

  void validate() const {
    auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidFlightSpec, why); };
    if (!(imu_rate > 0.0) || !std::isfinite(imu_rate)) fail("imu rate must be > 0");
    if (!(t_end > t_start)) fail("log end must follow its start");
    if (capture_times.empty()) fail("no capture times");
    for (std::size_t i = 0; i < capture_times.size(); ++i) {
      const double c = capture_times[i];
      if (!(c >= t_start && c <= t_end)) fail("capture time " + std::to_string(c) + " outside the log");
      if (i > 0 && !(c > capture_times[i - 1])) fail("capture times must increase");
    }
    if (noise.accel_sigma < 0 || noise.attitude_sigma < 0 || noise.altitude_sigma < 0) {
      fail("noise sigmas must be >= 0");
    }
    if (!(meters_per_pixel > 0.0)) fail("meters_per_pixel must be > 0");
    try {
      camera.validate();
    } catch (const Error& e) {
      fail(e.what());
    }
    for (std::size_t k = 0; k < sample_count(); ++k) {
      const double t = sample_time(k);
      if (!(position_at(t).z() > 0.0)) fail("altitude must stay > 0 (t=" + std::to_string(t) + ")");
      const Attitude a = attitude_at(t);
      if (!a.finite() || std::abs(a.pitch) >= shear_limit || std::abs(a.roll) >= shear_limit) {
        fail("attitude too steep at t=" + std::to_string(t));
      }
    }
  }

  friend bool operator==(const FlightSpec&, const FlightSpec&) = default;
};

struct GroundTruth {
  std::vector<PoseEstimate> poses;
  /// H_{i(i+1)}: maps frame i+1 pixels into frame i.
  std::vector<Homography> pair_homographies;
  /// Maps frame i pixels into frame 0.
  std::vector<Homography> to_reference;
};

struct Flight {
  std::vector<ImuSample> log;
  GroundTruth truth;
  PoseEstimate initial;
  Vec3 initial_velocity = Vec3::Zero();
};

/// Specific force read at rest, matching IntegrationConfig's default gravity.
inline const Vec3 rest_specific_force{0.0, 0.0, 9.81};

inline GroundTruth ground_truth_for(std::span<const PoseEstimate> poses, const CameraIntrinsics& k,
                                    const ProjectionOptions& options = {}) {
  GroundTruth truth;
  truth.poses.assign(poses.begin(), poses.end());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    truth.to_reference.push_back(frame_to_frame(poses[i], poses[0], k, options));
    if (i + 1 < poses.size()) {
      truth.pair_homographies.push_back(frame_to_frame(poses[i + 1], poses[i], k, options));
    }
  }
  return truth;
}

/// Synthesizes the IMU log of a flight (differentiating the trajectory,
/// rotating into the body frame and re-adding gravity) plus exact ground
/// truth at the capture times.
inline Flight make_flight(const FlightSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Flight flight;
  const std::size_t n = spec.sample_count();
  flight.log.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = spec.sample_time(k);
    Attitude att = spec.attitude_at(t);
    const Matrix3 r = body_to_world(att);
    ImuSample s;
    s.t = t;
    s.accel_body = r.transpose() * (spec.acceleration_at(t) + rest_specific_force) + spec.noise.accel_bias;
    if (spec.noise.accel_sigma > 0.0) {
      for (int axis = 0; axis < 3; ++axis) s.accel_body[axis] += spec.noise.accel_sigma * gauss(rng);
    }
    if (spec.noise.attitude_sigma > 0.0) {
      att.roll += spec.noise.attitude_sigma * gauss(rng);
      att.pitch += spec.noise.attitude_sigma * gauss(rng);
      att.yaw += spec.noise.attitude_sigma * gauss(rng);
    }
    att.yaw = normalize_angle(att.yaw);
    s.attitude = att;
    s.altitude = spec.position_at(t).z();
    if (spec.noise.altitude_sigma > 0.0) s.altitude += spec.noise.altitude_sigma * gauss(rng);
    s.altitude = std::max(s.altitude, 0.0);
    flight.log.push_back(s);
  }

  std::vector<PoseEstimate> poses;
  for (double c : spec.capture_times) poses.push_back(spec.pose_at(c));
  flight.truth = ground_truth_for(poses, spec.camera);
  flight.initial = spec.pose_at(spec.t_start);
  flight.initial_velocity = spec.velocity_at(spec.t_start);
  return flight;
}

/// Largest |x| or |y| (meters) of any capture's ground footprint.
inline double footprint_radius(const FlightSpec& spec) {
  double radius = 0.0;
  for (double c : spec.capture_times) {
    const Homography back = frame_projection(spec.pose_at(c), spec.camera).inverse();
    for (const auto& p : map_corners(back, spec.camera.width, spec.camera.height).points) {
      radius = std::max({radius, std::abs(p.x()), std::abs(p.y())});
    }
  }
  return radius;
}

enum class Texture { checkerboard, noise, tiled_noise };

inline Texture parse_texture(const std::string& name) {
  if (name == "checkerboard") return Texture::checkerboard;
  if (name == "noise") return Texture::noise;
  if (name == "tiled-noise") return Texture::tiled_noise;
  throw Error(ErrorCode::InvalidConfig, "unknown texture '" + name + "'");
}

/// A square built-in texture at the flight's ground scale, large enough for every
/// capture plus a margin, so no rendered ray misses it.
inline Orthophoto builtin_orthophoto(Texture texture, const FlightSpec& spec, std::uint64_t seed,
                                     double margin_m = 2.0) {
  constexpr int tile = 64;
  constexpr int max_side = 16384;
  const double half = footprint_radius(spec) + margin_m;
  const double side_px = 2.0 * half / spec.meters_per_pixel;
  if (!(side_px <= max_side)) {
    throw Error(ErrorCode::InvalidFlightSpec, "flight footprint needs a " + std::to_string(side_px) +
                                                  " px orthophoto (limit " + std::to_string(max_side) + ")");
  }
  const int side = (static_cast<int>(std::ceil(side_px)) + tile - 1) / tile * tile;
  switch (texture) {
    case Texture::checkerboard:
      return {checkerboard(side, side, 32, 0.15, 0.85), spec.meters_per_pixel};
    case Texture::tiled_noise:
      return {fractal_noise(side, side, seed, {5, 32, tile}), spec.meters_per_pixel};
    case Texture::noise:
    default:
      return {fractal_noise(side, side, seed, {6, 64, 0}), spec.meters_per_pixel};
  }
}

// ---------------------------------------------------------------------------
// FlightSpec text format. Sections in brackets, `key = values` lines,
// '#' comments. See docs/flight_spec.md.

inline FlightSpec parse_flight_spec(const std::string& contents) {
  FlightSpec spec;
  std::istringstream in(contents);
  std::string line, section;
  std::size_t line_no = 0;
  std::map<std::string, double> camera_values;
  auto scalar = [](const std::vector<double>& v, std::size_t line) {
    if (v.size() != 1) throw Error(ErrorCode::ParseError, text::located("expected one value", line));
    return v.front();
  };
  while (std::getline(in, line)) {
    ++line_no;
    auto body = text::trim(line);
    if (const auto hash = body.find('#'); hash != std::string_view::npos) body = text::trim(body.substr(0, hash));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']') throw Error(ErrorCode::ParseError, text::located("bad section header", line_no));
      section = std::string(text::trim(body.substr(1, body.size() - 2)));
      static const char* known[] = {"trajectory", "attitude", "imu", "captures", "noise", "camera", "scene"};
      if (std::find(std::begin(known), std::end(known), section) == std::end(known)) {
        throw Error(ErrorCode::ParseError, text::located("unknown section [" + section + "]", line_no));
      }
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorCode::ParseError, text::located("expected key = value", line_no));
    const std::string key(text::trim(body.substr(0, eq)));
    const auto values = text::parse_doubles(body.substr(eq + 1), line_no);
    auto unknown = [&] {
      return Error(ErrorCode::ParseError, text::located("unknown key '" + key + "' in [" + section + "]", line_no));
    };
    auto poly = [&] {
      if (values.empty()) throw Error(ErrorCode::ParseError, text::located("empty polynomial", line_no));
      return Polynomial{values};
    };
    if (section == "trajectory") {
      if (key == "x") spec.position[0] = poly();
      else if (key == "y") spec.position[1] = poly();
      else if (key == "z") spec.position[2] = poly();
      else throw unknown();
    } else if (section == "attitude") {
      if (key == "roll") spec.roll = poly();
      else if (key == "pitch") spec.pitch = poly();
      else if (key == "yaw") spec.yaw = poly();
      else throw unknown();
    } else if (section == "imu") {
      if (key == "rate") spec.imu_rate = scalar(values, line_no);
      else if (key == "start") spec.t_start = scalar(values, line_no);
      else if (key == "end") spec.t_end = scalar(values, line_no);
      else throw unknown();
    } else if (section == "captures") {
      if (key == "times") spec.capture_times = values;
      else throw unknown();
    } else if (section == "noise") {
      if (key == "accel_sigma") spec.noise.accel_sigma = scalar(values, line_no);
      else if (key == "attitude_sigma") spec.noise.attitude_sigma = scalar(values, line_no);
      else if (key == "altitude_sigma") spec.noise.altitude_sigma = scalar(values, line_no);
      else if (key == "accel_bias") {
        if (values.size() != 3) throw Error(ErrorCode::ParseError, text::located("accel_bias needs 3 values", line_no));
        spec.noise.accel_bias = Vec3(values[0], values[1], values[2]);
      } else throw unknown();
    } else if (section == "camera") {
      static const char* keys[] = {"fx", "fy", "cx", "cy", "skew", "width", "height"};
      if (std::find(std::begin(keys), std::end(keys), key) == std::end(keys)) throw unknown();
      camera_values[key] = scalar(values, line_no);
    } else if (section == "scene") {
      if (key == "meters_per_pixel") spec.meters_per_pixel = scalar(values, line_no);
      else throw unknown();
    } else {
      throw Error(ErrorCode::ParseError, text::located("key outside of a section", line_no));
    }
  }
  auto set = [&](const char* key, double& field) {
    if (auto it = camera_values.find(key); it != camera_values.end()) field = it->second;
  };
  set("fx", spec.camera.fx);
  set("fy", spec.camera.fy);
  set("cx", spec.camera.cx);
  set("cy", spec.camera.cy);
  set("skew", spec.camera.skew);
  set("width", spec.camera.width);
  set("height", spec.camera.height);
  spec.validate();
  return spec;
}

inline std::string format_flight_spec(const FlightSpec& spec) {
  auto join = [](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + text::format_double(v[i]);
    return s;
  };
  std::string out;
  out += "[trajectory]\n";
  out += "x = " + join(spec.position[0].coefficients) + "\n";
  out += "y = " + join(spec.position[1].coefficients) + "\n";
  out += "z = " + join(spec.position[2].coefficients) + "\n";
  out += "\n[attitude]\n";
  out += "roll = " + join(spec.roll.coefficients) + "\n";
  out += "pitch = " + join(spec.pitch.coefficients) + "\n";
  out += "yaw = " + join(spec.yaw.coefficients) + "\n";
  out += "\n[imu]\n";
  out += "rate = " + text::format_double(spec.imu_rate) + "\n";
  out += "start = " + text::format_double(spec.t_start) + "\n";
  out += "end = " + text::format_double(spec.t_end) + "\n";
  out += "\n[captures]\n";
  out += "times = " + join(spec.capture_times) + "\n";
  out += "\n[noise]\n";
  out += "accel_sigma = " + text::format_double(spec.noise.accel_sigma) + "\n";
  out += "attitude_sigma = " + text::format_double(spec.noise.attitude_sigma) + "\n";
  out += "altitude_sigma = " + text::format_double(spec.noise.altitude_sigma) + "\n";
  out += "accel_bias = " +
         join({spec.noise.accel_bias.x(), spec.noise.accel_bias.y(), spec.noise.accel_bias.z()}) + "\n";
  out += "\n[camera]\n";
  std::istringstream calib(format_calibration(spec.camera));
  std::string line;
  while (std::getline(calib, line)) {
    const auto eq = line.find('=');
    out += line.substr(0, eq) + " = " + line.substr(eq + 1) + "\n";
  }
  out += "\n[scene]\n";
  out += "meters_per_pixel = " + text::format_double(spec.meters_per_pixel) + "\n";
  return out;
}

}  // namespace aerostitch
