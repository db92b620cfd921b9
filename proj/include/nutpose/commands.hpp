#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nutpose/cloud.hpp"
#include "nutpose/config.hpp"
#include "nutpose/synth.hpp"

namespace nutpose {

/// Process exit codes shared by all subcommands.
enum class ExitStatus : int {
  Ok = 0,
  UsageError = 1,
  BadInput = 2,  // malformed or missing input file
  NoNuts = 3,    // pipeline ran but found no nut candidates
};

inline int exit_code(ExitStatus s) { return static_cast<int>(s); }

/// One row of clusters.json: the preprocess -> estimate handoff.
struct ClusterRecord {
  int id = 0;
  ClusterLabel label = ClusterLabel::Unknown;
  long point_count = 0;
  Point3 centroid;
  Vec3 bbox_dims;
};

std::string clusters_to_json(const std::vector<ClusterRecord>& records);
std::vector<ClusterRecord> clusters_from_json(std::string_view text);

struct SynthOptions {
  int nuts = 5;
  int distractors = 0;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  NoiseSpec noise;
};

/// Writes scene.json, frame_*.xyz, photo.pgm and truth.json into out_dir.
ExitStatus cmd_synth(const SynthOptions& opts, const PipelineConfig& cfg);

/// Reads frame_*.xyz from frames_dir, runs the preprocessing chain
/// (accumulate, height strip, cluster, size filter, centroid merge,
/// classify, z-fix for nuts) and writes the cluster list as JSON.
ExitStatus cmd_preprocess(const std::filesystem::path& frames_dir, const PipelineConfig& cfg,
                          const std::filesystem::path& out_path);

/// Scores every Nut cluster against the photo's binary edge image over the
/// yaw grid and writes the report array. cache_dir, when given, holds
/// per-nut prerender caches keyed by content hash.
ExitStatus cmd_estimate(const std::filesystem::path& clusters_path,
                        const std::filesystem::path& photo_path, const PipelineConfig& cfg,
                        const std::filesystem::path& out_path,
                        const std::optional<std::filesystem::path>& cache_dir = std::nullopt);

/// Paints the best-yaw edge models over the photo as a color PPM.
ExitStatus cmd_overlay(const std::filesystem::path& report_path,
                       const std::filesystem::path& photo_path, const PipelineConfig& cfg,
                       const std::filesystem::path& out_path);

}  // namespace nutpose
