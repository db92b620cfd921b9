#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "nutpose/cloud.hpp"
#include "nutpose/geometry.hpp"
#include "nutpose/imaging.hpp"
#include "nutpose/model.hpp"

namespace nutpose {

/// splitmix64: state advances by the golden-ratio increment
/// 0x9E3779B97F4A7C15, and each output is finalized with
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   z ^ (z >> 31)
/// Every random quantity in the generator derives from this stream, so
/// scenes are reproducible from the seed alone.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1), 53 mantissa bits.
  double next_double() { return (next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  /// Standard normal via Box-Muller (two uniforms per draw, no caching).
  double gaussian();

  /// Independent substream: a fresh generator whose seed mixes this
  /// generator's seed with the tag.
  static SplitMix64 substream(std::uint64_t seed, std::uint64_t tag) {
    SplitMix64 mixer(seed ^ (tag * 0x9E3779B97F4A7C15ull));
    return SplitMix64(mixer.next_u64());
  }

 private:
  std::uint64_t state_;
};

enum class ObjectKind : std::uint8_t { Nut, Screw, Washer, Placeholder };

const char* object_kind_name(ObjectKind kind);
ObjectKind object_kind_from_name(std::string_view name);

struct ScrewParams {
  double head_across_flats = 0.024;
  double head_height = 0.012;
  double shaft_radius = 0.006;
  double total_height = 0.12;
};

struct WasherParams {
  double outer_radius = 0.021;
  double bore_radius = 0.010;
  double height = 0.010;
};

struct PlaceholderParams {
  double side = 0.06;
  double height = 0.003;
};

using ObjectDims = std::variant<NutParams, ScrewParams, WasherParams, PlaceholderParams>;

/// One placed object. Poses put the model origin (volumetric center) at
/// table_height + half the object's height, so footprints rest on the plane.
struct ObjectSpec {
  ObjectKind kind = ObjectKind::Nut;
  Pose pose;
  double yaw_canonical = 0.0;  // wrap_yaw(pose.yaw); meaningful for nuts
  ObjectDims dims;
};

/// Ground-truth scene: placed objects plus the camera that observes them.
struct SceneSpec {
  std::vector<ObjectSpec> objects;
  double table_height = 0.75;
  CameraIntrinsics intr;
  CameraExtrinsics extr;
  std::uint64_t seed = 0;
};

struct NoiseSpec {
  double point_sigma = 0.0;      // per-coordinate Gaussian jitter, meters
  double dropout = 0.0;          // fraction of points removed per frame
  double speckle_density = 0.0;  // fraction of photo pixels overwritten

  void validate() const;
};

/// Scene-generation knobs. Callers fill the camera and table height from
/// the pipeline config; see make_scene_config in config.hpp.
struct SceneConfig {
  double table_height = 0.75;
  CameraIntrinsics intr;
  CameraExtrinsics extr;
  NutParams nut;
  ScrewParams screw;
  WasherParams washer;
  PlaceholderParams placeholder;
  double region_half_x = 0.18;   // placement region on the table, meters
  double region_half_y = 0.22;
  double clearance = 0.02;       // gap between object footprints, meters
  double sample_density = 500000.0;  // surface points per m^2 (1 per 2 mm^2)
};

class SceneTooCrowded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Circumscribed footprint radius of an object on the table plane.
double footprint_radius(const ObjectSpec& obj);

/// Model-frame mesh for an object.
TriMesh object_mesh(const ObjectSpec& obj);

/// Places n_nuts nuts and n_distractors screws/washers/placeholders without
/// footprint overlap. Deterministic in seed; nut yaws are uniform in
/// [0, 2pi) with the canonical form recorded. Throws SceneTooCrowded when
/// placement fails after bounded retries.
SceneSpec generate_scene(int n_nuts, int n_distractors, std::uint64_t seed,
                         const SceneConfig& cfg);

/// Samples surface points on camera-visible faces (back-face and
/// inter-object occlusion culling against a scene depth render), then
/// jitters and drops points per frame. Deterministic in (scene.seed, frame
/// index). sample_density is in points per m^2 of surface.
std::vector<PointCloudFrame> render_frames(const SceneSpec& scene, int n_frames,
                                           const NoiseSpec& noise,
                                           double sample_density = 500000.0);

/// White background (230) with objects as filled gray regions (120,
/// coverage-averaged at the silhouette), so Scharr recovers their contours.
/// speckle_density * W * H pixels (rounded, distinct) are overwritten with
/// a uniform random intensity in [148, 204]; dots between the two canvas
/// grays mimic an infrared projector pattern while an isolated speckle
/// stays below the default binarization threshold.
GrayImage render_edge_photo(const SceneSpec& scene, const NoiseSpec& noise);

// --- scene JSON ---------------------------------------------------------

std::string scene_to_json(const SceneSpec& scene);
SceneSpec scene_from_json(std::string_view text);

}  // namespace nutpose
