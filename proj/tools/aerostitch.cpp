#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "aerostitch/commands.hpp"

using namespace aerostitch;

namespace {

IntegrationMethod integration_method(const std::string& name) {
  return name == "trapezoid" ? IntegrationMethod::trapezoid : IntegrationMethod::simpson;
}

ChainMode chain_mode(const std::string& name) {
  return name == "pairwise" ? ChainMode::pairwise : ChainMode::anchored;
}

struct CommonOptions {
  std::string integration = "simpson";
  std::string chain = "anchored";
  std::uint64_t seed = 0;
  double ransac_threshold = 2.0;
  int ransac_iters = 1000;
  double feather = 0.1;
  unsigned threads = 0;

  ImuStitchOptions imu() const {
    ImuStitchOptions o;
    o.integration.method = integration_method(integration);
    return o;
  }
  FeatureStitchOptions features() const {
    FeatureStitchOptions o;
    o.chain = chain_mode(chain);
    o.ransac.seed = seed;
    o.ransac.threshold = ransac_threshold;
    o.ransac.max_iters = ransac_iters;
    return o;
  }
  BlendOptions blend() const { return {feather, threads}; }
};

void add_integration(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--integration", o.integration, "IMU integration rule")
      ->check(CLI::IsMember({"trapezoid", "simpson"}))
      ->capture_default_str();
}

void add_features(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--chain", o.chain, "Multi-frame registration")
      ->check(CLI::IsMember({"anchored", "pairwise"}))
      ->capture_default_str();
  cmd->add_option("--seed", o.seed, "RANSAC seed")->capture_default_str();
  cmd->add_option("--ransac-threshold", o.ransac_threshold, "Inlier threshold (px)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--ransac-iters", o.ransac_iters, "RANSAC iterations")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

void add_blend(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--feather", o.feather, "Feather margin as a fraction of the frame")
      ->check(CLI::Range(0.0, 0.5))
      ->capture_default_str();
  cmd->add_option("--threads", o.threads, "Worker threads (0 = all cores)")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Aerial image stitching from IMU data, with a feature-based baseline"};
  app.require_subcommand(1);
  CommonOptions common;

  // stitch
  auto* stitch = app.add_subcommand("stitch", "Stitch frames using the IMU log");
  StitchRequest stitch_req;
  std::string stitch_dataset;
  stitch->add_option("--dataset", stitch_dataset, "Dataset directory supplying defaults for the inputs");
  stitch->add_option("--images", stitch_req.images, "Directory of frames (file-name order)");
  stitch->add_option("--imu", stitch_req.imu, "IMU log CSV");
  stitch->add_option("--calib", stitch_req.calibration, "Camera calibration file");
  stitch->add_option("--captures", stitch_req.captures, "Capture times, one per line");
  stitch->add_option("--initial", stitch_req.initial, "Initial pose and velocity");
  stitch->add_option("--out", stitch_req.out, "Mosaic image (.png or .pgm)")->required();
  std::string stitch_method = "imu";
  stitch->add_option("--method", stitch_method, "Registration method")
      ->check(CLI::IsMember({"imu", "features"}))
      ->capture_default_str();
  add_integration(stitch, common);
  add_features(stitch, common);
  add_blend(stitch, common);

  // stitch-features
  auto* features = app.add_subcommand("stitch-features", "Stitch frames with the feature baseline");
  FeatureStitchRequest feature_req;
  features->add_option("--images", feature_req.images, "Directory of frames (file-name order)")->required();
  features->add_option("--out", feature_req.out, "Mosaic image (.png or .pgm)")->required();
  add_features(features, common);
  add_blend(features, common);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Render a synthetic dataset from a flight spec");
  SimulateRequest sim_req;
  simulate->add_option("--flight", sim_req.flight, "Flight spec file")->required();
  simulate->add_option("--ortho", sim_req.orthophoto,
                       "Orthophoto image, or a built-in texture: noise, tiled-noise, checkerboard")
      ->capture_default_str();
  simulate->add_option("--out", sim_req.out, "Output dataset directory")->required();
  simulate->add_option("--seed", sim_req.seed, "Noise and texture seed")->capture_default_str();
  simulate->add_option("--threads", sim_req.threads, "Worker threads (0 = all cores)")->capture_default_str();

  // eval
  auto* eval = app.add_subcommand("eval", "Run methods on a simulated dataset and compare with truth");
  EvalRequest eval_req;
  std::string methods = "imu,features";
  std::string report_path;
  bool timing = false;
  eval->add_option("--dataset", eval_req.dataset, "Dataset directory with truth.txt")->required();
  eval->add_option("--method", methods, "Comma-separated methods: imu, features")->capture_default_str();
  eval->add_option("--work", eval_req.work, "Directory for mosaics and sidecars (default <dataset>/eval)");
  eval->add_option("--report", report_path, "Also write the report to this file");
  eval->add_flag("--timing", timing, "Include runtimes in the report");
  add_integration(eval, common);
  add_features(eval, common);
  add_blend(eval, common);

  CLI11_PARSE(app, argc, argv);

  try {
    if (stitch->parsed() && stitch_method == "features") {
      if (!stitch_dataset.empty() && stitch_req.images.empty()) stitch_req.images = DatasetLayout{stitch_dataset}.frames();
      if (stitch_req.images.empty()) {
        std::cerr << "stitch: --images or --dataset is required\n";
        return exit_usage;
      }
      feature_req = {stitch_req.images, stitch_req.out, {}, {}};
    }
    if (stitch->parsed() && stitch_method == "imu") {
      if (!stitch_dataset.empty()) apply_dataset_defaults(stitch_req, stitch_dataset);
      for (const auto* p : {&stitch_req.images, &stitch_req.imu, &stitch_req.calibration, &stitch_req.captures,
                            &stitch_req.initial}) {
        if (p->empty()) {
          std::cerr << "stitch: --images, --imu, --calib, --captures and --initial are required without --dataset\n";
          return exit_usage;
        }
      }
      stitch_req.options = common.imu();
      stitch_req.blend = common.blend();
      const auto reg = cmd_stitch(stitch_req);
      std::cout << "stitched " << reg.to_reference.size() << " frames into " << stitch_req.out.string() << "\n";
      return exit_ok;
    }
    if (features->parsed() || stitch_method == "features") {
      feature_req.options = common.features();
      feature_req.blend = common.blend();
      const auto reg = cmd_stitch_features(feature_req);
      if (!reg.success) {
        std::cerr << "feature baseline failed at stage '" << reg.failure_stage << "': " << reg.failure_message << "\n";
        return exit_pipeline;
      }
      std::cout << "stitched " << reg.to_reference.size() << " frames into " << feature_req.out.string() << "\n";
      return exit_ok;
    }
    if (simulate->parsed()) {
      const auto flight = cmd_simulate(sim_req);
      std::cout << "wrote " << flight.truth.poses.size() << " frames and " << flight.log.size()
                << " IMU samples to " << sim_req.out.string() << "\n";
      return exit_ok;
    }
    if (eval->parsed()) {
      eval_req.methods.clear();
      for (auto m : text::split(methods, ',')) {
        if (!text::trim(m).empty()) eval_req.methods.emplace_back(text::trim(m));
      }
      eval_req.imu = common.imu();
      eval_req.features = common.features();
      eval_req.blend = common.blend();
      const auto reports = cmd_eval(eval_req);
      const std::string report = format_report(reports, timing);
      std::cout << report;
      if (!report_path.empty()) text::write_file(report_path, report);
      for (const auto& r : reports) {
        if (!r.success) return exit_pipeline;
      }
      return exit_ok;
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_usage;
  }
  return exit_usage;
}
