#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aerostitch/camera_model.hpp"
#include "aerostitch/dataset.hpp"
#include "aerostitch/error.hpp"
#include "aerostitch/image_io.hpp"
#include "aerostitch/imu_integration.hpp"
#include "aerostitch/pipeline.hpp"
#include "aerostitch/synthetic_scene.hpp"
#include "aerostitch/text.hpp"
#include "aerostitch/warp_compose.hpp"

// The four CLI commands as library calls. Each writes its outputs to disk and
// throws Error on bad input; feature-baseline failures are returned.
namespace aerostitch {

enum ExitCode : int {
  exit_ok = 0,
  exit_usage = 2,
  exit_pipeline = 3,
  exit_eval = 4,
};

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError:
    case ErrorCode::IoError:
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidFlightSpec:
      return exit_usage;
    case ErrorCode::EvalRequiresTruth:
      return exit_eval;
    default:
      return exit_pipeline;
  }
}

/// mosaic.png -> mosaic.transforms.txt
inline fs::path sidecar_path(const fs::path& mosaic) {
  fs::path p = mosaic;
  return p.replace_extension(".transforms.txt");
}

/// mosaic.png -> mosaic.matches.txt
inline fs::path diagnostics_path(const fs::path& mosaic) {
  fs::path p = mosaic;
  return p.replace_extension(".matches.txt");
}

inline void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

inline std::vector<ImageBuffer> load_frames(const std::vector<fs::path>& files) {
  std::vector<ImageBuffer> frames;
  frames.reserve(files.size());
  for (const auto& f : files) frames.push_back(read_image(f.string()));
  return frames;
}

inline void write_mosaic(const fs::path& out, std::span<const ImageBuffer> frames,
                         const std::vector<fs::path>& names, std::span<const Homography> to_reference,
                         const BlendOptions& blend) {
  const Mosaic mosaic = compose_mosaic(frames, to_reference, blend);
  ensure_parent(out);
  write_image(out.string(), mosaic.image);
  std::vector<SidecarEntry> entries;
  for (std::size_t i = 0; i < names.size(); ++i) entries.push_back({names[i].filename().string(), to_reference[i]});
  text::write_file(sidecar_path(out).string(), format_sidecar(entries));
}

// ---------------------------------------------------------------------------
// stitch

struct StitchRequest {
  fs::path images;
  fs::path imu;
  fs::path calibration;
  fs::path captures;
  fs::path initial;
  fs::path out;
  ImuStitchOptions options;
  BlendOptions blend;
};

/// Fills unset input paths from a dataset directory.
inline void apply_dataset_defaults(StitchRequest& req, const fs::path& dataset) {
  const DatasetLayout d{dataset};
  if (req.images.empty()) req.images = d.frames();
  if (req.imu.empty()) req.imu = d.imu();
  if (req.calibration.empty()) req.calibration = d.calibration();
  if (req.captures.empty()) req.captures = d.captures();
  if (req.initial.empty()) req.initial = d.initial();
}

inline ImuRegistration cmd_stitch(const StitchRequest& req) {
  const CameraIntrinsics k = parse_calibration(text::read_file(req.calibration.string()));
  const auto log = read_imu_csv(req.imu.string());
  const auto captures = parse_captures(text::read_file(req.captures.string()));
  const InitialState initial = parse_initial(text::read_file(req.initial.string()));
  const auto files = list_images(req.images);
  if (files.size() != captures.size()) {
    throw Error(ErrorCode::InvalidConfig, std::to_string(files.size()) + " images but " +
                                              std::to_string(captures.size()) + " capture times");
  }
  ImuStitchOptions options = req.options;
  options.integration.initial_velocity = initial.velocity;
  ImuRegistration reg = register_imu(log, captures, initial.pose, k, options);
  const auto frames = load_frames(files);
  write_mosaic(req.out, frames, files, reg.to_reference, req.blend);
  return reg;
}

// ---------------------------------------------------------------------------
// stitch-features

struct FeatureStitchRequest {
  fs::path images;
  fs::path out;
  FeatureStitchOptions options;
  BlendOptions blend;
};

inline std::string format_diagnostics(const FeatureRegistration& reg) {
  std::string out = "success = " + std::string(reg.success ? "true" : "false") + "\n";
  if (!reg.success) {
    out += "failure_stage = " + reg.failure_stage + "\n";
    out += "failure = " + reg.failure_message + "\n";
  }
  for (std::size_t i = 0; i < reg.links.size(); ++i) {
    const auto& l = reg.links[i];
    out += "link " + std::to_string(i) + "-" + std::to_string(i + 1) +
           " keypoints=" + std::to_string(l.keypoints_previous) + "," + std::to_string(l.keypoints_next) +
           " matches=" + std::to_string(l.matches) + " inliers=" + std::to_string(l.inliers) + "\n";
  }
  return out;
}

/// Writes the match diagnostics always, the mosaic and sidecar only on
/// success.
inline FeatureRegistration cmd_stitch_features(const FeatureStitchRequest& req) {
  const auto files = list_images(req.images);
  if (files.empty()) throw Error(ErrorCode::InvalidConfig, "no images in '" + req.images.string() + "'");
  const auto frames = load_frames(files);
  FeatureRegistration reg = register_features(frames, req.options);
  ensure_parent(req.out);
  text::write_file(diagnostics_path(req.out).string(), format_diagnostics(reg));
  if (reg.success) write_mosaic(req.out, frames, files, reg.to_reference, req.blend);
  return reg;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateRequest {
  fs::path flight;
  /// Image path, or one of the built-in textures: noise, tiled-noise,
  /// checkerboard.
  std::string orthophoto = "noise";
  fs::path out;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

inline bool is_builtin_texture(const std::string& name) {
  return name == "noise" || name == "tiled-noise" || name == "checkerboard";
}

inline Flight cmd_simulate(const SimulateRequest& req) {
  const FlightSpec spec = parse_flight_spec(text::read_file(req.flight.string()));
  const Flight flight = make_flight(spec, req.seed);
  const Orthophoto ortho = is_builtin_texture(req.orthophoto)
                               ? builtin_orthophoto(parse_texture(req.orthophoto), spec, req.seed)
                               : Orthophoto{read_image(req.orthophoto), spec.meters_per_pixel};
  const DatasetLayout d{req.out};
  fs::create_directories(d.frames());
  for (const auto& stale : list_images(d.frames())) fs::remove(stale);
  for (std::size_t i = 0; i < flight.truth.poses.size(); ++i) {
    const ImageBuffer view = to_gray(render_view(ortho, flight.truth.poses[i], spec.camera, {}, req.threads));
    write_image((d.frames() / frame_name(i)).string(), view);
  }
  std::ostringstream imu;
  write_imu_csv(imu, flight.log);
  text::write_file(d.imu().string(), imu.str());
  text::write_file(d.captures().string(), format_captures(spec.capture_times));
  text::write_file(d.calibration().string(), format_calibration(spec.camera));
  text::write_file(d.initial().string(), format_initial({flight.initial, flight.initial_velocity}));
  text::write_file(d.truth().string(), format_truth(flight.truth));
  text::write_file(d.flight().string(), format_flight_spec(spec));
  return flight;
}

// ---------------------------------------------------------------------------
// eval

struct EvalRequest {
  fs::path dataset;
  std::vector<std::string> methods{"imu", "features"};
  /// Mosaics and sidecars go here; defaults to <dataset>/eval.
  fs::path work;
  ImuStitchOptions imu;
  FeatureStitchOptions features;
  BlendOptions blend;
};

/// Runs each method on the dataset, re-reads the sidecar it wrote and scores
/// it against truth.txt.
inline std::vector<MethodReport> cmd_eval(const EvalRequest& req) {
  const DatasetLayout d{req.dataset};
  if (!fs::exists(d.truth())) {
    throw Error(ErrorCode::EvalRequiresTruth, "no ground truth at '" + d.truth().string() + "'");
  }
  const GroundTruth truth = parse_truth(text::read_file(d.truth().string()));
  const CameraIntrinsics k = parse_calibration(text::read_file(d.calibration().string()));
  const fs::path work = req.work.empty() ? req.dataset / "eval" : req.work;
  fs::create_directories(work);

  std::vector<MethodReport> reports;
  for (const auto& method : req.methods) {
    MethodReport report;
    report.method = method;
    const fs::path out = work / (method + ".png");
    const auto start = std::chrono::steady_clock::now();
    if (method == "imu") {
      StitchRequest s;
      apply_dataset_defaults(s, req.dataset);
      s.out = out;
      s.options = req.imu;
      s.blend = req.blend;
      try {
        cmd_stitch(s);
        report.success = true;
      } catch (const Error& e) {
        if (exit_code_for(e.code()) != exit_pipeline) throw;
        report.failure_stage = "imu";
        report.failure_message = e.what();
      }
    } else if (method == "features") {
      const FeatureRegistration reg = cmd_stitch_features({d.frames(), out, req.features, req.blend});
      report.success = reg.success;
      report.failure_stage = reg.failure_stage;
      report.failure_message = reg.failure_message;
      report.links = reg.links;
    } else {
      throw Error(ErrorCode::InvalidConfig, "unknown method '" + method + "'");
    }
    report.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.frames = truth.poses.size();
    if (report.success) {
      std::vector<Homography> estimate;
      for (const auto& e : parse_sidecar(text::read_file(sidecar_path(out).string()))) {
        estimate.push_back(e.to_reference);
      }
      score_against_truth(report, estimate, truth, k);
    }
    reports.push_back(std::move(report));
  }
  return reports;
}

}  // namespace aerostitch
