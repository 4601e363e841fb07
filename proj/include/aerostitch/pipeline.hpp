#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aerostitch/camera_model.hpp"
#include "aerostitch/error.hpp"
#include "aerostitch/feature_baseline.hpp"
#include "aerostitch/image.hpp"
#include "aerostitch/imu_integration.hpp"
#include "aerostitch/synthetic_scene.hpp"
#include "aerostitch/transform_pipeline.hpp"
#include "aerostitch/warp_compose.hpp"

namespace aerostitch {

// ---------------------------------------------------------------------------
// IMU pipeline

struct ImuStitchOptions {
  IntegrationConfig integration;
  ProjectionOptions projection;
};

struct ImuRegistration {
  std::vector<PoseEstimate> poses;
  /// H_{i(i+1)}, mapping frame i+1 into frame i.
  std::vector<Homography> pair_homographies;
  std::vector<Homography> to_reference;
};

/// Dead-reckons the capture poses, builds each pair homography from its two
/// poses and chains them into frame 0.
inline ImuRegistration register_imu(std::span<const ImuSample> log, std::span<const double> capture_times,
                                    const PoseEstimate& initial, const CameraIntrinsics& k,
                                    const ImuStitchOptions& options = {}) {
  ImuRegistration out;
  out.poses = poses_at_captures(log, capture_times, initial, options.integration);
  out.to_reference.push_back(Homography::identity());
  for (std::size_t i = 0; i + 1 < out.poses.size(); ++i) {
    try {
      out.pair_homographies.push_back(frame_to_frame(out.poses[i + 1], out.poses[i], k, options.projection));
    } catch (const Error& e) {
      throw Error(e.code(), "frame " + std::to_string(i + 1) + ": " + e.what());
    }
    out.to_reference.push_back(chain(out.pair_homographies));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Feature baseline

enum class ChainMode { anchored, pairwise };

struct FeatureStitchOptions {
  int max_corners = 500;
  double min_distance = 8.0;
  HarrisOptions harris;
  MatchOptions match;
  RansacOptions ransac;
  ChainMode chain = ChainMode::anchored;
};

struct LinkDiagnostics {
  std::size_t keypoints_previous = 0;
  std::size_t keypoints_next = 0;
  std::size_t matches = 0;
  std::size_t inliers = 0;
};

struct FeatureRegistration {
  bool success = false;
  /// "detect", "match", "ransac" or "register" when success is false.
  std::string failure_stage;
  std::string failure_message;
  /// Index of the link (frame i to i+1) that failed.
  std::size_t failed_link = 0;
  std::vector<LinkDiagnostics> links;
  std::vector<Homography> to_reference;
};

namespace detail {

inline std::size_t keypoint_index(std::span<const Keypoint> kps, const Vec2& p) {
  for (std::size_t k = 0; k < kps.size(); ++k) {
    if (kps[k].position == p) return k;
  }
  throw Error(ErrorCode::InvalidConfig, "match does not refer to a keypoint");
}

}  // namespace detail

/// Harris + ZNCC + RANSAC on each consecutive pair, then pairwise chaining or
/// anchored estimation over the inlier tracks. Failures are reported, not
/// thrown, so callers can tell which stage broke.
inline FeatureRegistration register_features(std::span<const ImageBuffer> frames,
                                             const FeatureStitchOptions& options = {}) {
  FeatureRegistration out;
  if (frames.empty()) throw Error(ErrorCode::InvalidConfig, "no frames");
  if (frames.size() == 1) {
    out.success = true;
    out.to_reference.push_back(Homography::identity());
    return out;
  }

  std::vector<ImageBuffer> gray;
  std::vector<std::vector<Keypoint>> keypoints;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    gray.push_back(to_gray(frames[i]));
    try {
      keypoints.push_back(detect_corners(gray.back(), options.max_corners, options.min_distance, options.harris));
    } catch (const Error& e) {
      out.failure_stage = "detect";
      out.failure_message = "frame " + std::to_string(i) + ": " + e.what();
      out.failed_link = i == 0 ? 0 : i - 1;
      return out;
    }
  }

  // Track ids follow keypoints from link to link.
  std::vector<std::vector<std::int64_t>> track_of(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) track_of[i].assign(keypoints[i].size(), -1);
  std::uint64_t next_track = 0;

  std::vector<Link> links;
  for (std::size_t i = 0; i + 1 < frames.size(); ++i) {
    LinkDiagnostics diag;
    diag.keypoints_previous = keypoints[i].size();
    diag.keypoints_next = keypoints[i + 1].size();
    const auto matches = match_patches(keypoints[i], gray[i], keypoints[i + 1], gray[i + 1], options.match);
    diag.matches = matches.size();
    out.links.push_back(diag);
    auto fail = [&](const char* stage, const std::string& why) {
      out.failure_stage = stage;
      out.failure_message = "frames " + std::to_string(i) + "-" + std::to_string(i + 1) + ": " + why;
      out.failed_link = i;
      return out;
    };
    if (matches.size() < 4) {
      return fail("match", std::to_string(matches.size()) + " usable correspondences (need 4)");
    }
    RansacResult fit;
    try {
      fit = ransac_homography(matches, options.ransac);
    } catch (const Error& e) {
      return fail("ransac", e.what());
    }
    out.links.back().inliers = fit.inliers.size();

    Link link;
    for (std::size_t idx : fit.inliers) {
      const auto& m = matches[idx];
      const std::size_t a = detail::keypoint_index(keypoints[i], m.x_i);
      const std::size_t b = detail::keypoint_index(keypoints[i + 1], m.x_j);
      if (track_of[i][a] < 0) track_of[i][a] = static_cast<std::int64_t>(next_track++);
      track_of[i + 1][b] = track_of[i][a];
      link.push_back({m.x_i, m.x_j, static_cast<std::uint64_t>(track_of[i][a])});
    }
    links.push_back(std::move(link));
  }

  try {
    out.to_reference = options.chain == ChainMode::anchored ? register_anchored(links) : register_pairwise(links);
  } catch (const Error& e) {
    out.failure_stage = "register";
    out.failure_message = e.what();
    return out;
  }
  out.success = true;
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation against ground truth

struct MethodReport {
  std::string method;
  bool success = false;
  std::string failure_stage;
  std::string failure_message;
  std::size_t frames = 0;
  /// Corner error of the implied pair maps (to_ref[i]^-1 * to_ref[i+1]).
  double pair_error_mean = 0.0;
  double pair_error_max = 0.0;
  /// Corner error of every frame's to-reference map, averaged.
  double reference_error_mean = 0.0;
  /// Corner error of the last frame's to-reference map.
  double drift = 0.0;
  std::vector<LinkDiagnostics> links;
  double runtime_s = 0.0;
};

/// Fills the error fields of `report` from estimated to-reference maps.
inline void score_against_truth(MethodReport& report, std::span<const Homography> to_reference,
                                const GroundTruth& truth, const CameraIntrinsics& k) {
  if (to_reference.size() != truth.to_reference.size()) {
    throw Error(ErrorCode::InvalidConfig, "estimate has " + std::to_string(to_reference.size()) +
                                              " frames, truth has " + std::to_string(truth.to_reference.size()));
  }
  report.frames = to_reference.size();
  report.pair_error_mean = report.pair_error_max = report.reference_error_mean = report.drift = 0.0;
  for (std::size_t i = 0; i + 1 < to_reference.size(); ++i) {
    const Homography pair = to_reference[i].inverse() * to_reference[i + 1];
    const CornerError e = corner_reprojection_error(pair, truth.pair_homographies[i], k.width, k.height);
    report.pair_error_mean += e.mean / static_cast<double>(to_reference.size() - 1);
    report.pair_error_max = std::max(report.pair_error_max, e.max);
  }
  for (std::size_t i = 0; i < to_reference.size(); ++i) {
    const CornerError e = corner_reprojection_error(to_reference[i], truth.to_reference[i], k.width, k.height);
    report.reference_error_mean += e.mean / static_cast<double>(to_reference.size());
    if (i + 1 == to_reference.size()) report.drift = e.mean;
  }
}

inline std::string format_report(std::span<const MethodReport> reports, bool timing) {
  std::string out;
  auto put = [&](const std::string& key, const std::string& value) { out += key + " = " + value + "\n"; };
  auto num = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return std::string(buf);
  };
  for (const auto& r : reports) {
    const std::string p = r.method + ".";
    put(p + "success", r.success ? "true" : "false");
    put(p + "frames", std::to_string(r.frames));
    if (!r.success) {
      put(p + "failure_stage", r.failure_stage.empty() ? "unknown" : r.failure_stage);
      put(p + "failure", r.failure_message);
    } else {
      put(p + "pair_error_mean_px", num(r.pair_error_mean));
      put(p + "pair_error_max_px", num(r.pair_error_max));
      put(p + "reference_error_mean_px", num(r.reference_error_mean));
      put(p + "drift_px", num(r.drift));
    }
    if (r.method == "features") {
      std::string matches, inliers, ratios;
      for (std::size_t i = 0; i < r.links.size(); ++i) {
        const auto& l = r.links[i];
        const std::string sep = i ? " " : "";
        matches += sep + std::to_string(l.matches);
        inliers += sep + std::to_string(l.inliers);
        ratios += sep + num(l.matches ? static_cast<double>(l.inliers) / static_cast<double>(l.matches) : 0.0);
      }
      put(p + "matches", matches);
      put(p + "inliers", inliers);
      put(p + "inlier_ratio", ratios);
    }
    if (timing) put(p + "runtime_s", num(r.runtime_s));
  }
  return out;
}

}  // namespace aerostitch
