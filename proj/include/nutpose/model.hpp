#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string_view>
#include <vector>

#include "nutpose/edge_class.hpp"
#include "nutpose/geometry.hpp"

namespace nutpose {

/// Parametric hex-nut dimensions, defaulting to a thin M20-style nut
/// (30 mm across flats, 9 mm high, 10 mm bore radius). across_flats is the
/// width between opposing side faces.
struct NutParams {
  double across_flats = 0.030;
  double height = 0.009;
  double bore_radius = 0.010;
  double samples_per_meter = 4000.0;

  void validate() const;
};

/// Indexed triangle mesh, model frame.
struct TriMesh {
  std::vector<Point3> vertices;
  std::vector<std::array<int, 3>> triangles;

  /// Throws std::invalid_argument on out-of-range indices or degenerate
  /// triangles (area <= 1e-12 m^2).
  void validate() const;
};

/// Number of flat segments approximating the cylindrical bore.
inline constexpr int kBoreSegments = 24;

inline constexpr double kDefaultDihedralThreshold = std::numbers::pi / 6.0;  // 30 deg
inline constexpr double kDefaultSilhouetteEps = 0.002;  // meters

/// Solid n-gon prism, origin at the volumetric center, axis +z.
TriMesh make_prism(int n, double circumradius, double height);

/// n-gon prism with an axis-aligned polygonal bore through it.
TriMesh make_prism_with_bore(int n, double circumradius, double height,
                             double bore_radius, int bore_segments);

/// Axis-aligned box, origin at the center.
TriMesh make_box(double sx, double sy, double sz);

TriMesh translate_mesh(TriMesh mesh, const Vec3& offset);
TriMesh merge_meshes(const TriMesh& a, const TriMesh& b);

/// Watertight hexagonal prism with a 24-gon bore, exact 6-fold symmetry
/// about z, origin at the volumetric center.
TriMesh build_hex_nut(const NutParams& params);

/// Parses the OBJ subset "v x y z" / "f i j k" (1-based, triangles only).
/// Other line types are ignored. Throws ParseError with the line number.
TriMesh load_obj(std::string_view text);

enum class StaticEdgeTag : std::uint8_t { Boundary, Sharp };

/// A mesh feature edge: open border (boundary) or crease whose dihedral
/// angle exceeds the threshold (sharp).
struct FeatureEdge {
  int a = 0;
  int b = 0;
  StaticEdgeTag tag = StaticEdgeTag::Sharp;
};

std::vector<FeatureEdge> find_feature_edges(const TriMesh& mesh, double dihedral_threshold);

/// A point sampled along a feature edge, with its static tag.
struct EdgeSample {
  Point3 position;
  StaticEdgeTag tag = StaticEdgeTag::Sharp;
};

/// Samples each feature edge at ceil(length * density) + 1 uniformly spaced
/// points including endpoints.
std::vector<EdgeSample> sample_feature_edges(const TriMesh& mesh,
                                             const std::vector<FeatureEdge>& edges,
                                             double samples_per_meter);

std::vector<EdgeSample> extract_feature_edges(const TriMesh& mesh,
                                              double dihedral_threshold,
                                              double samples_per_meter);

/// Per-pixel camera-frame depth; +infinity where nothing was rasterized.
struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<double> depth;

  DepthImage() = default;
  DepthImage(int w, int h)
      : width(w),
        height(h),
        depth(static_cast<std::size_t>(w) * h, std::numeric_limits<double>::infinity()) {}

  bool in_bounds(int x, int y) const {
    return x >= 0 && x < width && y >= 0 && y < height;
  }
  double at(int x, int y) const {
    return depth[static_cast<std::size_t>(y) * width + x];
  }
  double& at(int x, int y) {
    return depth[static_cast<std::size_t>(y) * width + x];
  }
};

/// Rasterizes the posed mesh into a z-buffer with perspective-correct depth
/// interpolation. Triangles with any vertex at or behind the camera are
/// skipped (no near-plane clipping; scene cameras keep geometry in front).
DepthImage render_depth(const TriMesh& mesh, const Pose& pose,
                        const CameraIntrinsics& intr, const CameraExtrinsics& extr);

/// Rasterizes world-frame triangles from several meshes into one z-buffer.
DepthImage render_depth_world(const std::vector<Point3>& vertices,
                              const std::vector<std::array<int, 3>>& triangles,
                              const CameraIntrinsics& intr, const CameraExtrinsics& extr);

struct ClassifiedEdgePoint {
  Pixel px;
  double depth = 0.0;
  EdgeClass cls = EdgeClass::HighCurvature;

  bool operator==(const ClassifiedEdgePoint&) const = default;
};

/// Projects each sample and classifies it:
///  - behind-camera samples are dropped;
///  - boundary-tagged samples are Boundary regardless of depth;
///  - samples whose depth exceeds the depth image at their pixel by more
///    than silhouette_eps are Occluded;
///  - samples with an empty (+inf) pixel somewhere in their 3x3
///    neighborhood are Occluding;
///  - the rest are HighCurvature.
/// The depth image must come from render_depth at the same pose/camera;
/// mismatched dimensions raise std::invalid_argument.
std::vector<ClassifiedEdgePoint> classify_edges(const std::vector<EdgeSample>& samples,
                                                const Pose& pose,
                                                const CameraIntrinsics& intr,
                                                const CameraExtrinsics& extr,
                                                const DepthImage& depth,
                                                double silhouette_eps);

/// Bundles the nut mesh, its sampled feature edges, and the camera, so one
/// classification per (centroid, yaw) is a single call.
struct EdgeModelRenderer {
  TriMesh mesh;
  std::vector<EdgeSample> samples;
  CameraIntrinsics intr;
  CameraExtrinsics extr;
  double silhouette_eps = kDefaultSilhouetteEps;

  EdgeModelRenderer(const NutParams& nut, double dihedral_threshold,
                    const CameraIntrinsics& intrinsics, const CameraExtrinsics& extrinsics,
                    double eps);

  std::vector<ClassifiedEdgePoint> classify_at(const Point3& centroid, double yaw) const;
};

/// Classified edge sets for one nut position, keyed by yaw.
struct PrerenderCache {
  std::uint64_t content_hash = 0;
  std::vector<double> yaws;
  std::vector<std::vector<ClassifiedEdgePoint>> entries;

  /// Exact-yaw lookup; nullptr when the yaw is not cached.
  const std::vector<ClassifiedEdgePoint>* lookup(double yaw) const;
};

std::uint64_t compute_cache_hash(const NutParams& nut, const CameraIntrinsics& intr,
                                 const CameraExtrinsics& extr, const Point3& centroid,
                                 const std::vector<double>& yaws,
                                 double dihedral_threshold, double silhouette_eps);

/// Classifies the nut at every yaw in the grid. Cache lookups are
/// bit-identical to calling the renderer directly.
PrerenderCache build_prerender_cache(const NutParams& nut, const CameraIntrinsics& intr,
                                     const CameraExtrinsics& extr, const Point3& centroid,
                                     const std::vector<double>& yaws,
                                     double dihedral_threshold = kDefaultDihedralThreshold,
                                     double silhouette_eps = kDefaultSilhouetteEps);

/// Binary cache file: magic, format version, content hash, then per-yaw
/// records of (yaw, count, repeated u,v,depth,class). Stable across runs on
/// the same platform.
void save_prerender_cache(const PrerenderCache& cache, const std::filesystem::path& path);

/// Throws ParseError (byte offset) on bad magic/version or truncation.
PrerenderCache load_prerender_cache(const std::filesystem::path& path);

std::string encode_prerender_cache(const PrerenderCache& cache);
PrerenderCache decode_prerender_cache(std::string_view bytes);

}  // namespace nutpose
