#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "nutpose/commands.hpp"
#include "nutpose/config.hpp"
#include "nutpose/errors.hpp"

using namespace nutpose;

int main(int argc, char** argv) {
  CLI::App app{"Hex-nut yaw estimation from point-cloud frames and an edge photo"};
  app.require_subcommand(0, 1);

  std::string config_path;
  bool dump = false;
  app.add_option("--config", config_path, "Pipeline config file (key = value lines)");
  app.add_flag("--dump-config", dump, "Print the effective config to stdout and exit");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a ground-truth scene");
  SynthOptions sopts;
  std::string synth_out;
  synth->add_option("--nuts", sopts.nuts, "Number of nuts")->capture_default_str();
  synth->add_option("--distractors", sopts.distractors, "Number of screws/washers/placeholders")
      ->capture_default_str();
  synth->add_option("--seed", sopts.seed, "Random seed")->capture_default_str();
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--point-sigma", sopts.noise.point_sigma, "Point jitter sigma, meters")
      ->capture_default_str();
  synth->add_option("--dropout", sopts.noise.dropout, "Fraction of points dropped per frame")
      ->capture_default_str();
  synth->add_option("--speckle", sopts.noise.speckle_density,
                    "Fraction of photo pixels overwritten with speckle noise")
      ->capture_default_str();

  // preprocess
  auto* preprocess = app.add_subcommand("preprocess", "Cluster and classify frame files");
  std::string frames_dir, preprocess_out = "clusters.json";
  preprocess->add_option("--frames", frames_dir, "Directory with frame_*.xyz")->required();
  preprocess->add_option("--out", preprocess_out, "Output clusters JSON")->capture_default_str();

  // estimate
  auto* estimate = app.add_subcommand("estimate", "Score nut yaw hypotheses against the photo");
  std::string clusters_path, est_photo, estimate_out = "report.json", cache_dir;
  estimate->add_option("--clusters", clusters_path, "clusters.json from preprocess")->required();
  estimate->add_option("--photo", est_photo, "Camera photo (PGM)")->required();
  estimate->add_option("--out", estimate_out, "Output report JSON")->capture_default_str();
  estimate->add_option("--cache", cache_dir, "Directory for prerender cache files");

  // overlay
  auto* overlay = app.add_subcommand("overlay", "Paint best-yaw edge models over the photo");
  std::string report_path, ov_photo, overlay_out = "overlay.ppm";
  overlay->add_option("--report", report_path, "report.json from estimate")->required();
  overlay->add_option("--photo", ov_photo, "Camera photo (PGM)")->required();
  overlay->add_option("--out", overlay_out, "Output overlay PPM")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_code(ExitStatus::UsageError);
  }

  PipelineConfig cfg;
  try {
    cfg = config_path.empty() ? PipelineConfig::defaults() : load_config(config_path);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return exit_code(ExitStatus::BadInput);
  }

  if (dump) {
    std::cout << dump_config(cfg);
    if (app.get_subcommands().empty()) return exit_code(ExitStatus::Ok);
  }

  if (synth->parsed()) {
    sopts.out_dir = synth_out;
    return exit_code(cmd_synth(sopts, cfg));
  }
  if (preprocess->parsed()) {
    return exit_code(cmd_preprocess(frames_dir, cfg, preprocess_out));
  }
  if (estimate->parsed()) {
    std::optional<std::filesystem::path> cache;
    if (!cache_dir.empty()) cache = cache_dir;
    return exit_code(cmd_estimate(clusters_path, est_photo, cfg, estimate_out, cache));
  }
  if (overlay->parsed()) {
    return exit_code(cmd_overlay(report_path, ov_photo, cfg, overlay_out));
  }

  std::cerr << app.help();
  return exit_code(ExitStatus::UsageError);
}
