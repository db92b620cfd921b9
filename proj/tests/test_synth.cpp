#include "nutpose/synth.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "nutpose/config.hpp"
#include "nutpose/errors.hpp"
#include "nutpose/imaging.hpp"
#include "nutpose/matching.hpp"

namespace nutpose {
namespace {

SceneConfig test_scene_config() { return make_scene_config(PipelineConfig::defaults()); }

TEST(SplitMix, ReferenceVector) {
  // Canonical splitmix64 outputs for seed 0.
  SplitMix64 rng(0);
  EXPECT_EQ(rng.next_u64(), 0xE220A8397B1DCDAFull);
  EXPECT_EQ(rng.next_u64(), 0x6E789E6AA1B965F4ull);
  EXPECT_EQ(rng.next_u64(), 0x06C45D188009454Full);
}

TEST(SplitMix, DoublesInUnitInterval) {
  SplitMix64 rng(123);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.next_double();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(SplitMix, SubstreamsDiffer) {
  SplitMix64 a = SplitMix64::substream(42, 1);
  SplitMix64 b = SplitMix64::substream(42, 2);
  EXPECT_NE(a.next_u64(), b.next_u64());
}

TEST(GenerateScene, DeterministicInSeed) {
  const auto cfg = test_scene_config();
  const SceneSpec a = generate_scene(5, 3, 42, cfg);
  const SceneSpec b = generate_scene(5, 3, 42, cfg);
  EXPECT_EQ(scene_to_json(a), scene_to_json(b));
  const SceneSpec c = generate_scene(5, 3, 43, cfg);
  EXPECT_NE(scene_to_json(a), scene_to_json(c));
}

TEST(GenerateScene, EmptyScene) {
  const SceneSpec s = generate_scene(0, 0, 1, test_scene_config());
  EXPECT_TRUE(s.objects.empty());
}

TEST(GenerateScene, FootprintsNeverOverlap) {
  const auto cfg = test_scene_config();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SceneSpec s = generate_scene(5, 3, seed, cfg);
    ASSERT_EQ(s.objects.size(), 8u);
    for (std::size_t i = 0; i < s.objects.size(); ++i) {
      for (std::size_t j = i + 1; j < s.objects.size(); ++j) {
        const double dx = s.objects[i].pose.position.x - s.objects[j].pose.position.x;
        const double dy = s.objects[i].pose.position.y - s.objects[j].pose.position.y;
        const double min_dist =
            footprint_radius(s.objects[i]) + footprint_radius(s.objects[j]);
        EXPECT_GT(std::sqrt(dx * dx + dy * dy), min_dist);
      }
    }
  }
}

TEST(GenerateScene, NutYawsCanonicalized) {
  const SceneSpec s = generate_scene(20, 0, 7, test_scene_config());
  for (const auto& o : s.objects) {
    EXPECT_GE(o.yaw_canonical, 0.0);
    EXPECT_LT(o.yaw_canonical, kYawPeriod);
    EXPECT_EQ(o.yaw_canonical, wrap_yaw(o.pose.yaw));
  }
}

TEST(GenerateScene, CrowdedSceneFails) {
  auto cfg = test_scene_config();
  cfg.region_half_x = 0.05;
  cfg.region_half_y = 0.05;
  EXPECT_THROW(generate_scene(40, 0, 1, cfg), SceneTooCrowded);
}

// Test-only oracle: exact point-to-triangle distance.
double point_triangle_distance(const Point3& p, const Point3& a, const Point3& b,
                               const Point3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = dot(ab, ap), d2 = dot(ac, ap);
  if (d1 <= 0 && d2 <= 0) return norm(ap);
  const Vec3 bp = p - b;
  const double d3 = dot(ab, bp), d4 = dot(ac, bp);
  if (d3 >= 0 && d4 <= d3) return norm(bp);
  const Vec3 cp = p - c;
  const double d5 = dot(ab, cp), d6 = dot(ac, cp);
  if (d6 >= 0 && d5 <= d6) return norm(cp);
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) {
    const double v = d1 / (d1 - d3);
    return norm(ap - ab * v);
  }
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) {
    const double w = d2 / (d2 - d6);
    return norm(ap - ac * w);
  }
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return norm(p - (b + (c - b) * w));
  }
  const double denom = 1.0 / (dot(ab, ab) * dot(ac, ac) - dot(ab, ac) * dot(ab, ac));
  const double v = (dot(ac, ac) * d1 - dot(ab, ac) * d2) * denom;
  const double w = (dot(ab, ab) * d2 - dot(ab, ac) * d1) * denom;
  return norm(p - (a + ab * v + ac * w));
}

TEST(RenderFrames, NoiselessPointsLieOnTheSurface) {
  const auto cfg = test_scene_config();
  const SceneSpec scene = generate_scene(1, 0, 5, cfg);
  const auto frames = render_frames(scene, 2, NoiseSpec{}, cfg.sample_density);
  ASSERT_EQ(frames.size(), 2u);
  ASSERT_GT(frames[0].points.size(), 100u);

  const TriMesh mesh = object_mesh(scene.objects[0]);
  std::vector<Point3> world(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    world[i] = apply_pose(scene.objects[0].pose, mesh.vertices[i]);
  }
  // Check a subsample to keep the test fast.
  for (std::size_t i = 0; i < frames[0].points.size(); i += 17) {
    const Point3& p = frames[0].points[i];
    double best = 1e18;
    for (const auto& t : mesh.triangles) {
      best = std::min(best, point_triangle_distance(p, world[t[0]], world[t[1]], world[t[2]]));
      if (best < 1e-9) break;
    }
    EXPECT_LT(best, 1e-9);
  }
}

TEST(RenderFrames, FramesAreIndependentMeasurements) {
  // Frames resample the surface, so accumulating them averages sampling
  // noise; that is the point of waiting for several messages before
  // computing a centroid.
  const auto cfg = test_scene_config();
  const SceneSpec scene = generate_scene(1, 0, 11, cfg);
  const Point3 truth = scene.objects[0].pose.position;
  const auto frames = render_frames(scene, 11, NoiseSpec{}, cfg.sample_density);
  ASSERT_EQ(frames.size(), 11u);
  EXPECT_NE(format_xyz(frames[0]), format_xyz(frames[1]));

  auto centroid_err = [&](const std::vector<Point3>& pts) {
    Point3 sum;
    for (const auto& p : pts) sum = sum + p;
    sum = sum * (1.0 / double(pts.size()));
    return std::hypot(sum.x - truth.x, sum.y - truth.y);
  };
  double single = 0.0;
  std::vector<Point3> all;
  for (const auto& f : frames) {
    single += centroid_err(f.points);
    all.insert(all.end(), f.points.begin(), f.points.end());
  }
  single /= frames.size();
  // The accumulated centroid is at least as good as a typical single frame.
  EXPECT_LE(centroid_err(all), single + 1e-4);
}

TEST(RenderFrames, FullDropoutEmptiesFrames) {
  const auto cfg = test_scene_config();
  const SceneSpec scene = generate_scene(1, 0, 5, cfg);
  NoiseSpec noise;
  noise.dropout = 1.0;
  const auto frames = render_frames(scene, 2, noise, cfg.sample_density);
  for (const auto& f : frames) EXPECT_TRUE(f.points.empty());
}

TEST(RenderFrames, JitterIsDeterministicPerFrame) {
  const auto cfg = test_scene_config();
  const SceneSpec scene = generate_scene(1, 0, 5, cfg);
  NoiseSpec noise;
  noise.point_sigma = 0.001;
  noise.dropout = 0.1;
  const auto a = render_frames(scene, 3, noise, cfg.sample_density);
  const auto b = render_frames(scene, 3, noise, cfg.sample_density);
  for (int f = 0; f < 3; ++f) EXPECT_EQ(format_xyz(a[f]), format_xyz(b[f]));
  // Different frames get different noise.
  EXPECT_NE(format_xyz(a[0]), format_xyz(a[1]));
}

TEST(RenderFrames, OcclusionStarvesTheFarNut) {
  auto cfg = test_scene_config();
  SceneSpec scene;
  scene.table_height = cfg.table_height;
  scene.intr = cfg.intr;
  scene.extr = cfg.extr;
  scene.seed = 99;
  // Camera looks from -x: two nuts on the view ray through the table
  // center, nearly touching so the near one shadows the far one's walls.
  for (double x : {-0.02, 0.02}) {
    ObjectSpec nut;
    nut.kind = ObjectKind::Nut;
    nut.dims = cfg.nut;
    nut.pose.position = {x, 0.0, cfg.table_height + cfg.nut.height / 2.0};
    nut.pose.yaw = 0.0;
    nut.yaw_canonical = 0.0;
    scene.objects.push_back(nut);
  }
  const auto frames = render_frames(scene, 1, NoiseSpec{}, cfg.sample_density);
  ASSERT_EQ(frames.size(), 1u);
  long near_count = 0, far_count = 0;
  for (const auto& p : frames[0].points) {
    if (p.x < 0.0) ++near_count;
    if (p.x > 0.0) ++far_count;
  }
  EXPECT_GT(near_count, 0);
  EXPECT_GT(far_count, 0);  // the far nut still peeks over the near one
  EXPECT_LT(far_count, near_count);
}

TEST(RenderEdgePhoto, EmptySceneIsConstant) {
  const auto cfg = test_scene_config();
  const SceneSpec scene = generate_scene(0, 0, 3, cfg);
  const GrayImage photo = render_edge_photo(scene, NoiseSpec{});
  for (auto v : photo.values) EXPECT_EQ(v, 230);
  const auto grad = scharr_magnitude(photo);
  for (double m : grad.magnitude) EXPECT_EQ(m, 0.0);
}

TEST(RenderEdgePhoto, ObjectsAreFilledGray) {
  const auto cfg = test_scene_config();
  const SceneSpec scene = generate_scene(1, 0, 8, cfg);
  const GrayImage photo = render_edge_photo(scene, NoiseSpec{});
  const long gray = std::count(photo.values.begin(), photo.values.end(), 120);
  const long white = std::count(photo.values.begin(), photo.values.end(), 230);
  EXPECT_GT(gray, 100);                                   // filled interior
  EXPECT_GT(white, long(photo.values.size()) * 9 / 10);   // background
  // Everything else is the coverage-averaged silhouette ring.
  for (auto v : photo.values) {
    EXPECT_GE(v, 120);
    EXPECT_LE(v, 230);
  }
}

TEST(RenderEdgePhoto, SpeckleCountIsExact) {
  const auto cfg = test_scene_config();
  const SceneSpec scene = generate_scene(1, 0, 8, cfg);
  const GrayImage clean = render_edge_photo(scene, NoiseSpec{});
  NoiseSpec noise;
  noise.speckle_density = 0.05;
  const GrayImage noisy = render_edge_photo(scene, noise);
  long changed = 0;
  for (std::size_t i = 0; i < clean.values.size(); ++i) {
    if (clean.values[i] != noisy.values[i]) ++changed;
  }
  EXPECT_EQ(changed, std::llround(0.05 * clean.values.size()));
}

TEST(RenderEdgePhoto, DeterministicBytes) {
  const auto cfg = test_scene_config();
  const SceneSpec scene = generate_scene(2, 2, 14, cfg);
  NoiseSpec noise;
  noise.speckle_density = 0.02;
  const GrayImage a = render_edge_photo(scene, noise);
  const GrayImage b = render_edge_photo(scene, noise);
  EXPECT_EQ(encode_pgm(a), encode_pgm(b));
}

TEST(RenderEdgePhoto, SilhouetteMatchesModelProjection) {
  // The thresholded photo must contain the projected model silhouette:
  // >= 95% of occluding-class pixels within 1 pixel of a set bit.
  const auto pipeline = PipelineConfig::defaults();
  const auto cfg = make_scene_config(pipeline);
  const SceneSpec scene = generate_scene(1, 0, 21, cfg);
  const GrayImage photo = render_edge_photo(scene, NoiseSpec{});
  const auto bits = threshold(scharr_magnitude(photo), pipeline.scharr_threshold);

  const EdgeModelRenderer renderer(cfg.nut, pipeline.dihedral_threshold, cfg.intr, cfg.extr,
                                   pipeline.silhouette_eps);
  const auto& nut = scene.objects[0];
  const auto classified = renderer.classify_at(nut.pose.position, nut.pose.yaw);

  long on = 0, total = 0;
  for (const auto& p : classified) {
    if (p.cls != EdgeClass::Occluding) continue;
    ++total;
    bool near = false;
    for (int dv = -1; dv <= 1 && !near; ++dv)
      for (int du = -1; du <= 1; ++du) {
        if (edge_bit(bits, p.px.u + du, p.px.v + dv)) {
          near = true;
          break;
        }
      }
    if (near) ++on;
  }
  ASSERT_GT(total, 50);
  EXPECT_GE(double(on) / double(total), 0.95);
}

TEST(GroundTruthConsistency, FullPipelineRecoversYawAndCentroid) {
  // cloud -> matching on noiseless single-nut scenes: centroid within 5 mm
  // in x,y and yaw within half a grid step on the symmetry circle.
  const auto pipeline = PipelineConfig::defaults();
  const auto cfg = make_scene_config(pipeline);
  const EdgeModelRenderer renderer(cfg.nut, pipeline.dihedral_threshold, cfg.intr, cfg.extr,
                                   pipeline.silhouette_eps);
  for (std::uint64_t seed : {400u, 402u, 403u}) {
    const SceneSpec scene = generate_scene(1, 0, seed, cfg);
    const auto frames =
        render_frames(scene, pipeline.filter.n_frames, NoiseSpec{}, cfg.sample_density);
    const GrayImage photo = render_edge_photo(scene, NoiseSpec{});
    const auto bits = threshold(scharr_magnitude(photo), pipeline.scharr_threshold);

    const auto acc = accumulate(frames, pipeline.filter.n_frames);
    const auto stripped = strip_by_height(acc.frame, pipeline.filter);
    auto clusters = cluster_points(stripped, pipeline.filter.distance_tolerance);
    clusters = filter_min_points(clusters, pipeline.filter.min_points);
    clusters = merge_by_centroid(clusters, pipeline.filter.centroid_merge_dist);
    const Cluster* nut = nullptr;
    for (auto& c : clusters) {
      if (classify_cluster(c, pipeline.filter) == ClusterLabel::Nut) {
        c.centroid = fix_centroid_z(c.centroid, pipeline.filter);
        nut = &c;
        break;
      }
    }
    ASSERT_NE(nut, nullptr);

    const Point3 truth_pos = scene.objects[0].pose.position;
    EXPECT_LE(std::abs(nut->centroid.x - truth_pos.x), 0.005);
    EXPECT_LE(std::abs(nut->centroid.y - truth_pos.y), 0.005);

    const auto source = [&](double yaw) { return renderer.classify_at(nut->centroid, yaw); };
    const auto report =
        sweep_yaw(0, nut->centroid, source, bits, pipeline.grid, pipeline.hit);
    const double diff =
        std::fmod(std::abs(report.best_yaw - scene.objects[0].yaw_canonical), kYawPeriod);
    EXPECT_LE(std::min(diff, kYawPeriod - diff), 0.075 + 1e-9) << "seed " << seed;
  }
}

TEST(GroundTruthConsistency, OnGridYawIsRecoveredExactly) {
  // When the true yaw sits on a sweep grid value, that value wins.
  const auto pipeline = PipelineConfig::defaults();
  const auto cfg = make_scene_config(pipeline);
  SceneSpec scene = generate_scene(1, 0, 777, cfg);
  scene.objects[0].pose.yaw = 2 * 0.15;  // grid value 0.30
  scene.objects[0].yaw_canonical = wrap_yaw(scene.objects[0].pose.yaw);

  const GrayImage photo = render_edge_photo(scene, NoiseSpec{});
  const auto bits = threshold(scharr_magnitude(photo), pipeline.scharr_threshold);
  const EdgeModelRenderer renderer(cfg.nut, pipeline.dihedral_threshold, cfg.intr, cfg.extr,
                                   pipeline.silhouette_eps);
  const Point3 anchor = scene.objects[0].pose.position;
  const auto source = [&](double yaw) { return renderer.classify_at(anchor, yaw); };
  const auto report = sweep_yaw(0, anchor, source, bits, pipeline.grid, pipeline.hit);
  EXPECT_EQ(report.best_yaw, 2 * 0.15);
}

TEST(SceneJson, RoundTrip) {
  const auto cfg = test_scene_config();
  const SceneSpec scene = generate_scene(3, 3, 17, cfg);
  const SceneSpec parsed = scene_from_json(scene_to_json(scene));
  EXPECT_EQ(scene_to_json(parsed), scene_to_json(scene));
  EXPECT_EQ(parsed.objects.size(), scene.objects.size());
  EXPECT_EQ(parsed.seed, scene.seed);
}

TEST(SceneJson, MalformedFails) {
  EXPECT_THROW(scene_from_json("{"), ParseError);
  EXPECT_THROW(scene_from_json("{\"seed\": 1}"), ParseError);
}

TEST(NoiseSpec, Validation) {
  NoiseSpec n;
  n.dropout = 1.5;
  EXPECT_THROW(n.validate(), std::invalid_argument);
  n = NoiseSpec{};
  n.point_sigma = -1.0;
  EXPECT_THROW(n.validate(), std::invalid_argument);
  n = NoiseSpec{};
  n.speckle_density = -0.1;
  EXPECT_THROW(n.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace nutpose
