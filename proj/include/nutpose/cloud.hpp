#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "nutpose/geometry.hpp"

namespace nutpose {

/// One point-cloud message worth of world-frame points.
struct PointCloudFrame {
  std::vector<Point3> points;
  int frame_index = 0;
};

/// Preprocessing parameters. Heights are relative to the table support
/// plane; bounds are inclusive.
struct FilterParams {
  int min_points = 8;
  double min_heights = 0.008;
  double max_heights = 0.13;
  double distance_tolerance = 0.01;
  double centroid_merge_dist = 0.02;
  int n_frames = 11;
  double table_height = 0.75;
  double nut_height = 0.009;
  Vec3 nut_ref_dims{0.030, 0.030, 0.009};
  double dim_tolerance = 0.008;

  void validate() const;
};

enum class ClusterLabel : std::uint8_t { Nut, Screw, Washer, Unknown };

const char* cluster_label_name(ClusterLabel label);
ClusterLabel cluster_label_from_name(std::string_view name);

/// A segmented point group with its mean centroid and axis-aligned bounding
/// box extents.
struct Cluster {
  std::vector<Point3> points;
  Point3 centroid;
  Vec3 bbox_dims;
  ClusterLabel label = ClusterLabel::Unknown;
};

/// Builds a cluster from points, filling centroid and bbox_dims.
Cluster make_cluster(std::vector<Point3> points);

struct AccumulateResult {
  PointCloudFrame frame;
  bool short_input = false;  // fewer than n_frames frames were available
};

/// Concatenates the first min(n_frames, available) frames into one frame.
/// Throws std::invalid_argument on an empty frame list.
AccumulateResult accumulate(const std::vector<PointCloudFrame>& frames, int n_frames);

/// Keeps exactly the points with
/// min_heights <= (z - table_height) <= max_heights.
PointCloudFrame strip_by_height(const PointCloudFrame& frame, const FilterParams& params);

/// Single-linkage Euclidean clustering: connected components of the graph
/// joining point pairs at distance <= distance_tolerance. Naive O(n^2) for
/// small inputs, spatial grid for n > 2000; both produce identical
/// components.
std::vector<Cluster> cluster_points(const PointCloudFrame& frame, double distance_tolerance);

/// Keeps clusters with at least min_points points (inclusive).
std::vector<Cluster> filter_min_points(const std::vector<Cluster>& clusters, int min_points);

/// Merges clusters whose centroids lie within centroid_merge_dist,
/// repeating until stable (merging moves centroids, which can bring
/// further clusters into range). Recomputes centroid and bbox.
std::vector<Cluster> merge_by_centroid(const std::vector<Cluster>& clusters,
                                       double centroid_merge_dist);

/// Labels a cluster by comparing its bbox extents to the nut reference
/// dimensions. The z reference is reduced by min_heights: clusters are
/// built from height-stripped points, so an object resting on the table
/// can never show its full height.
ClusterLabel classify_cluster(const Cluster& c, const FilterParams& params);

/// Overrides z with the known table height plus half a nut's height.
Point3 fix_centroid_z(const Point3& centroid, const FilterParams& params);

// --- frame files ------------------------------------------------------
//
// Plain text, one point per line: "x y z" separated by single spaces.
// '#'-prefixed lines are comments; file order is point order. A frame
// sequence is a directory of files frame_000.xyz, frame_001.xyz, ...

/// Throws ParseError with the offending line number.
PointCloudFrame parse_xyz(std::string_view text, int frame_index = 0);

std::string format_xyz(const PointCloudFrame& frame);

/// Loads frame_*.xyz from a directory in index order. Throws
/// std::runtime_error when the directory has no frame files.
std::vector<PointCloudFrame> read_frame_dir(const std::filesystem::path& dir);

void write_frame_dir(const std::filesystem::path& dir,
                     const std::vector<PointCloudFrame>& frames);

}  // namespace nutpose
