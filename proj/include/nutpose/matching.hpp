#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nutpose/geometry.hpp"
#include "nutpose/imaging.hpp"
#include "nutpose/model.hpp"

namespace nutpose {

struct HitParams {
  /// A model point is a hit when at least this fraction of its 3x3 image
  /// neighborhood is set (default: 4 of 9 pixels).
  double hit_threshold = 4.0 / 9.0;

  void validate() const;
};

struct TypeScore {
  EdgeClass edge_class = EdgeClass::Occluding;
  long hits = 0;
  long misses = 0;
  double ratio = 0.0;

  bool operator==(const TypeScore&) const = default;
};

/// Per-nut result row: per-edge-type hit ratios, the pooled score, and the
/// best yaw over the sweep grid.
struct MatchReport {
  int nut_id = 0;
  Point3 centroid;
  std::optional<TypeScore> occluding;
  std::optional<TypeScore> boundary;
  std::optional<TypeScore> high_curvature;
  double pooled_score = 0.0;
  double best_yaw = 0.0;
  std::vector<std::pair<double, double>> per_yaw;  // (yaw, pooled score)
};

/// Sweep grid: values are start, start+step, ..., up to end (inclusive,
/// 1e-9 slack). The default covers one symmetry period the way a coarse
/// 0.15 rad sweep does: {0, 0.15, ..., 1.05}; the 1.05 endpoint slightly
/// overshoots pi/3, so validation admits end < pi/3 + step.
struct YawGrid {
  double start = 0.0;
  double end = 1.05;
  double step = 0.15;

  void validate() const;
  std::vector<double> values() const;
};

/// Reads the bit at (x, y); out-of-bounds coordinates count as non-edge.
int edge_bit(const BinaryEdgeImage& img, int x, int y);

/// Fraction of set pixels in the full 3x3 neighborhood centered at (x, y).
double neighborhood_score(const BinaryEdgeImage& img, int x, int y);

struct RankResult {
  long hits = 0;
  long misses = 0;
  double ratio = 0.0;
};

/// Ranks projected points against the edge image: a point is a hit iff its
/// neighborhood score reaches hp.hit_threshold. Throws NoScorablePoints on
/// an empty point list.
RankResult edge_ranking(const std::vector<Pixel>& points, const BinaryEdgeImage& img,
                        const HitParams& hp);

struct PoseScore {
  std::optional<TypeScore> occluding;
  std::optional<TypeScore> boundary;
  std::optional<TypeScore> high_curvature;
  long total_hits = 0;
  long total_points = 0;
  double pooled = 0.0;
};

/// Scores one pose: occluded points are excluded entirely; the remaining
/// three classes are ranked in a single pass, so the pooled score is
/// total hits / total points, not the mean of the per-type ratios.
/// Throws NoScorablePoints when every point is occluded.
PoseScore score_pose(const std::vector<ClassifiedEdgePoint>& model_points,
                     const BinaryEdgeImage& img, const HitParams& hp);

/// Produces the classified edge model for a yaw hypothesis; either a direct
/// render or a prerender-cache lookup.
using EdgeModelSource = std::function<std::vector<ClassifiedEdgePoint>(double yaw)>;

/// Evaluates score_pose at every grid yaw and reports the argmax, ties
/// broken toward the smallest yaw. Yaws where scoring is impossible are
/// skipped; if every yaw fails, NoScorablePoints propagates.
MatchReport sweep_yaw(int nut_id, const Point3& centroid, const EdgeModelSource& source,
                      const BinaryEdgeImage& img, const YawGrid& grid, const HitParams& hp);

// --- report JSON -------------------------------------------------------

std::string report_to_json(const MatchReport& report);
std::string reports_to_json(const std::vector<MatchReport>& reports);
MatchReport report_from_json(std::string_view text);
std::vector<MatchReport> reports_from_json(std::string_view text);

}  // namespace nutpose
