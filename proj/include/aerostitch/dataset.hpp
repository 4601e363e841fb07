#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "aerostitch/error.hpp"
#include "aerostitch/image_io.hpp"
#include "aerostitch/imu_integration.hpp"
#include "aerostitch/synthetic_scene.hpp"
#include "aerostitch/text.hpp"
#include "aerostitch/transform_pipeline.hpp"

// On-disk pieces of a dataset directory:
//   frames/        one image per capture, lexicographic order = capture order
//   imu.csv        IMU log
//   captures.txt   capture times, one per line
//   camera.calib   intrinsics
//   initial.txt    pose and velocity at the first IMU sample
//   truth.txt      ground truth (simulated datasets only)
namespace aerostitch {

namespace fs = std::filesystem;

struct DatasetLayout {
  fs::path root;

  fs::path frames() const { return root / "frames"; }
  fs::path imu() const { return root / "imu.csv"; }
  fs::path captures() const { return root / "captures.txt"; }
  fs::path calibration() const { return root / "camera.calib"; }
  fs::path initial() const { return root / "initial.txt"; }
  fs::path truth() const { return root / "truth.txt"; }
  fs::path flight() const { return root / "flight.spec"; }
};

inline std::string frame_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%03zu.pgm", index);
  return buf;
}

/// Image files (.pgm, .png) in `dir`, sorted by file name.
inline std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, "not a directory: '" + dir.string() + "'");
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = lower_extension(entry.path().string());
    if (ext == ".pgm" || ext == ".png") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
  return out;
}

// ---------------------------------------------------------------------------
// Capture times

inline std::vector<double> parse_captures(const std::string& contents) {
  std::vector<double> out;
  std::istringstream in(contents);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = text::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const double t = text::parse_double(body, line_no);
    if (!out.empty() && !(t > out.back())) {
      throw Error(ErrorCode::ParseError, text::located("capture times must increase", line_no));
    }
    out.push_back(t);
  }
  if (out.empty()) throw Error(ErrorCode::ParseError, "no capture times");
  return out;
}

inline std::string format_captures(const std::vector<double>& times) {
  std::string out;
  for (double t : times) out += text::format_double(t) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Initial state: key=value lines t x y z roll pitch yaw vx vy vz. Velocity
// keys are optional and default to zero.

struct InitialState {
  PoseEstimate pose;
  Vec3 velocity = Vec3::Zero();
};

inline InitialState parse_initial(const std::string& contents) {
  std::map<std::string, double, std::less<>> values;
  std::istringstream in(contents);
  std::string line;
  std::size_t line_no = 0;
  static const char* known[] = {"t", "x", "y", "z", "roll", "pitch", "yaw", "vx", "vy", "vz"};
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = text::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorCode::ParseError, text::located("expected key=value", line_no));
    const std::string key(text::trim(body.substr(0, eq)));
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
      throw Error(ErrorCode::ParseError, text::located("unknown key '" + key + "'", line_no));
    }
    if (values.count(key)) throw Error(ErrorCode::ParseError, text::located("duplicate key '" + key + "'", line_no));
    values[key] = text::parse_double(body.substr(eq + 1), line_no);
  }
  for (const char* required : {"t", "x", "y", "z", "roll", "pitch", "yaw"}) {
    if (!values.count(required)) throw Error(ErrorCode::ParseError, std::string("missing key '") + required + "'");
  }
  auto get = [&](const char* key) { return values.count(key) ? values[key] : 0.0; };
  InitialState s;
  s.pose = PoseEstimate(get("t"), Vec3(get("x"), get("y"), get("z")),
                        {get("roll"), get("pitch"), normalize_angle(get("yaw"))});
  s.velocity = Vec3(get("vx"), get("vy"), get("vz"));
  return s;
}

inline std::string format_initial(const InitialState& s) {
  const auto& p = s.pose.position();
  const auto& a = s.pose.attitude();
  std::string out;
  auto put = [&](const char* key, double v) { out += std::string(key) + "=" + text::format_double(v) + "\n"; };
  put("t", s.pose.t());
  put("x", p.x());
  put("y", p.y());
  put("z", p.z());
  put("roll", a.roll);
  put("pitch", a.pitch);
  put("yaw", a.yaw);
  put("vx", s.velocity.x());
  put("vy", s.velocity.y());
  put("vz", s.velocity.z());
  return out;
}

// ---------------------------------------------------------------------------
// Homography rows shared by truth and sidecar files

inline std::string format_matrix(const Homography& h) {
  std::string out;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out += (r || c ? " " : "") + text::format_double(h(r, c));
  }
  return out;
}

inline Homography parse_matrix(const std::vector<double>& v, std::size_t line_no) {
  if (v.size() != 9) throw Error(ErrorCode::ParseError, text::located("expected 9 matrix entries", line_no));
  Matrix3 m;
  m << v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8];
  try {
    return Homography(m);
  } catch (const Error& e) {
    throw Error(ErrorCode::ParseError, text::located(e.what(), line_no));
  }
}

// ---------------------------------------------------------------------------
// Ground truth:
//   frames N
//   pose i t x y z roll pitch yaw
//   to_reference i h00 ... h22
//   pair i h00 ... h22          (maps frame i+1 into frame i)

inline std::string format_truth(const GroundTruth& truth) {
  std::string out = "frames " + std::to_string(truth.poses.size()) + "\n";
  for (std::size_t i = 0; i < truth.poses.size(); ++i) {
    const auto& p = truth.poses[i];
    out += "pose " + std::to_string(i) + " " + text::format_double(p.t());
    for (double v : {p.position().x(), p.position().y(), p.position().z(), p.attitude().roll,
                     p.attitude().pitch, p.attitude().yaw}) {
      out += " " + text::format_double(v);
    }
    out += "\n";
  }
  for (std::size_t i = 0; i < truth.to_reference.size(); ++i) {
    out += "to_reference " + std::to_string(i) + " " + format_matrix(truth.to_reference[i]) + "\n";
  }
  for (std::size_t i = 0; i < truth.pair_homographies.size(); ++i) {
    out += "pair " + std::to_string(i) + " " + format_matrix(truth.pair_homographies[i]) + "\n";
  }
  return out;
}

inline GroundTruth parse_truth(const std::string& contents) {
  GroundTruth truth;
  std::istringstream in(contents);
  std::string line;
  std::size_t line_no = 0, frames = 0;
  bool have_count = false;
  auto index = [&](std::string_view tok, std::size_t expected) {
    const double v = text::parse_double(tok, line_no);
    if (v != static_cast<double>(expected)) {
      throw Error(ErrorCode::ParseError, text::located("records out of order", line_no));
    }
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = text::split_whitespace(line);
    if (tokens.empty() || tokens.front().front() == '#') continue;
    const auto kind = tokens.front();
    std::vector<double> values;
    for (std::size_t k = 2; k < tokens.size(); ++k) values.push_back(text::parse_double(tokens[k], line_no));
    if (kind == "frames") {
      if (tokens.size() != 2) throw Error(ErrorCode::ParseError, text::located("expected 'frames N'", line_no));
      frames = static_cast<std::size_t>(text::parse_double(tokens[1], line_no));
      have_count = true;
    } else if (tokens.size() < 2) {
      throw Error(ErrorCode::ParseError, text::located("missing record index", line_no));
    } else if (kind == "pose") {
      index(tokens[1], truth.poses.size());
      if (values.size() != 7) throw Error(ErrorCode::ParseError, text::located("pose needs 7 values", line_no));
      truth.poses.emplace_back(values[0], Vec3(values[1], values[2], values[3]),
                               Attitude{values[4], values[5], values[6]});
    } else if (kind == "to_reference") {
      index(tokens[1], truth.to_reference.size());
      truth.to_reference.push_back(parse_matrix(values, line_no));
    } else if (kind == "pair") {
      index(tokens[1], truth.pair_homographies.size());
      truth.pair_homographies.push_back(parse_matrix(values, line_no));
    } else {
      throw Error(ErrorCode::ParseError, text::located("unknown record '" + std::string(kind) + "'", line_no));
    }
  }
  if (!have_count || truth.poses.size() != frames || truth.to_reference.size() != frames ||
      truth.pair_homographies.size() + 1 != std::max<std::size_t>(frames, 1)) {
    throw Error(ErrorCode::ParseError, "ground truth record counts do not match 'frames'");
  }
  return truth;
}

// ---------------------------------------------------------------------------
// Sidecar: one `frame <file name> h00 ... h22` line per frame, to-reference
// homographies in frame order.

struct SidecarEntry {
  std::string frame;
  Homography to_reference;
};

inline std::string format_sidecar(const std::vector<SidecarEntry>& entries) {
  std::string out;
  for (const auto& e : entries) out += "frame " + e.frame + " " + format_matrix(e.to_reference) + "\n";
  return out;
}

inline std::vector<SidecarEntry> parse_sidecar(const std::string& contents) {
  std::vector<SidecarEntry> out;
  std::istringstream in(contents);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = text::split_whitespace(line);
    if (tokens.empty() || tokens.front().front() == '#') continue;
    if (tokens.front() != "frame" || tokens.size() != 11) {
      throw Error(ErrorCode::ParseError, text::located("expected 'frame <name> h00 ... h22'", line_no));
    }
    std::vector<double> values;
    for (std::size_t k = 2; k < tokens.size(); ++k) values.push_back(text::parse_double(tokens[k], line_no));
    out.push_back({std::string(tokens[1]), parse_matrix(values, line_no)});
  }
  return out;
}

}  // namespace aerostitch
