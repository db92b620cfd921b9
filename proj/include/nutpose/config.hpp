#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "nutpose/cloud.hpp"
#include "nutpose/geometry.hpp"
#include "nutpose/matching.hpp"
#include "nutpose/model.hpp"
#include "nutpose/synth.hpp"

namespace nutpose {

/// Every pipeline parameter in one place. The config file is plain text,
/// one "section.key = value" per line, '#' comments; unknown keys are
/// rejected. Camera extrinsics are configured as a position and a look-at
/// target (world z up).
struct PipelineConfig {
  FilterParams filter;
  NutParams nut;
  CameraIntrinsics camera;
  Point3 camera_pos;
  Point3 camera_target;
  HitParams hit;
  YawGrid grid;
  double scharr_threshold = 1100.0;
  double dihedral_threshold = kDefaultDihedralThreshold;
  double silhouette_eps = kDefaultSilhouetteEps;

  static PipelineConfig defaults();

  CameraExtrinsics extrinsics() const {
    return CameraExtrinsics::look_at(camera_pos, camera_target);
  }

  void validate() const;
};

/// Throws ConfigError on unknown keys or malformed values.
PipelineConfig parse_config(std::string_view text);

PipelineConfig load_config(const std::filesystem::path& path);

/// Effective values, full round-trip precision: parse_config(dump_config(c))
/// reproduces c exactly.
std::string dump_config(const PipelineConfig& cfg);

SceneConfig make_scene_config(const PipelineConfig& cfg);

}  // namespace nutpose
