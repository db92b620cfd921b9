#include "nutpose/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "nutpose/errors.hpp"

namespace nutpose {

using ordered_json = nlohmann::ordered_json;

namespace {

// Substream tags.
constexpr std::uint64_t kTagPlacement = 1;
constexpr std::uint64_t kTagSpeckle = 3;
constexpr std::uint64_t kTagFrame = 1000;  // + frame index

constexpr double kVisibilityEps = 0.003;  // depth-test slack for surface samples, meters

constexpr std::uint8_t kBackgroundGray = 230;
constexpr std::uint8_t kObjectGray = 120;
// Speckle intensities sit between the two canvas grays. With the default
// binarization threshold of 1100, one speckle (max Scharr response
// 10*82 = 820) or any pair sharing a kernel (max 13*84 = 1092) stays below
// threshold on either canvas, so speckle can only corrupt real contours,
// never mint new edges.
constexpr int kSpeckleLo = 148;
constexpr int kSpeckleHi = 204;

}  // namespace

double SplitMix64::gaussian() {
  const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
  const double u2 = next_double();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

const char* object_kind_name(ObjectKind kind) {
  switch (kind) {
    case ObjectKind::Nut:
      return "Nut";
    case ObjectKind::Screw:
      return "Screw";
    case ObjectKind::Washer:
      return "Washer";
    case ObjectKind::Placeholder:
      return "Placeholder";
  }
  return "Nut";
}

ObjectKind object_kind_from_name(std::string_view name) {
  if (name == "Nut") return ObjectKind::Nut;
  if (name == "Screw") return ObjectKind::Screw;
  if (name == "Washer") return ObjectKind::Washer;
  if (name == "Placeholder") return ObjectKind::Placeholder;
  throw std::invalid_argument("unknown object kind: " + std::string(name));
}

void NoiseSpec::validate() const {
  if (!(point_sigma >= 0.0)) throw std::invalid_argument("noise: point_sigma must be >= 0");
  if (!(dropout >= 0.0 && dropout <= 1.0)) {
    throw std::invalid_argument("noise: dropout must be in [0,1]");
  }
  if (!(speckle_density >= 0.0 && speckle_density <= 1.0)) {
    throw std::invalid_argument("noise: speckle_density must be in [0,1]");
  }
}

double footprint_radius(const ObjectSpec& obj) {
  struct Visitor {
    double operator()(const NutParams& p) const {
      return (p.across_flats / 2.0) / std::cos(std::numbers::pi / 6.0);
    }
    double operator()(const ScrewParams& p) const {
      return (p.head_across_flats / 2.0) / std::cos(std::numbers::pi / 6.0);
    }
    double operator()(const WasherParams& p) const { return p.outer_radius; }
    double operator()(const PlaceholderParams& p) const {
      return p.side * std::numbers::sqrt2 / 2.0;
    }
  };
  return std::visit(Visitor{}, obj.dims);
}

namespace {

double object_height(const ObjectSpec& obj) {
  struct Visitor {
    double operator()(const NutParams& p) const { return p.height; }
    double operator()(const ScrewParams& p) const { return p.total_height; }
    double operator()(const WasherParams& p) const { return p.height; }
    double operator()(const PlaceholderParams& p) const { return p.height; }
  };
  return std::visit(Visitor{}, obj.dims);
}

}  // namespace

TriMesh object_mesh(const ObjectSpec& obj) {
  struct Visitor {
    TriMesh operator()(const NutParams& p) const { return build_hex_nut(p); }
    TriMesh operator()(const ScrewParams& p) const {
      const double head_r = (p.head_across_flats / 2.0) / std::cos(std::numbers::pi / 6.0);
      const double shaft_len = p.total_height - p.head_height;
      TriMesh head = translate_mesh(make_prism(6, head_r, p.head_height),
                                    {0, 0, -(p.total_height - p.head_height) / 2.0});
      TriMesh shaft = translate_mesh(make_prism(24, p.shaft_radius, shaft_len),
                                     {0, 0, p.head_height / 2.0});
      return merge_meshes(head, shaft);
    }
    TriMesh operator()(const WasherParams& p) const {
      return make_prism_with_bore(24, p.outer_radius, p.height, p.bore_radius, 24);
    }
    TriMesh operator()(const PlaceholderParams& p) const {
      return make_box(p.side, p.side, p.height);
    }
  };
  return std::visit(Visitor{}, obj.dims);
}

SceneSpec generate_scene(int n_nuts, int n_distractors, std::uint64_t seed,
                         const SceneConfig& cfg) {
  if (n_nuts < 0 || n_distractors < 0) {
    throw std::invalid_argument("generate_scene: counts must be nonnegative");
  }
  cfg.intr.validate();
  cfg.extr.validate();

  SceneSpec scene;
  scene.table_height = cfg.table_height;
  scene.intr = cfg.intr;
  scene.extr = cfg.extr;
  scene.seed = seed;

  SplitMix64 rng = SplitMix64::substream(seed, kTagPlacement);

  const int total = n_nuts + n_distractors;
  for (int i = 0; i < total; ++i) {
    ObjectSpec obj;
    if (i < n_nuts) {
      obj.kind = ObjectKind::Nut;
      obj.dims = cfg.nut;
    } else {
      switch ((i - n_nuts) % 3) {
        case 0:
          obj.kind = ObjectKind::Screw;
          obj.dims = cfg.screw;
          break;
        case 1:
          obj.kind = ObjectKind::Washer;
          obj.dims = cfg.washer;
          break;
        default:
          obj.kind = ObjectKind::Placeholder;
          obj.dims = cfg.placeholder;
          break;
      }
    }

    const double r = footprint_radius(obj);
    const double hx = cfg.region_half_x - r;
    const double hy = cfg.region_half_y - r;
    if (hx <= 0.0 || hy <= 0.0) {
      throw SceneTooCrowded("object footprint larger than the placement region");
    }

    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      const double x = rng.uniform(-hx, hx);
      const double y = rng.uniform(-hy, hy);
      bool ok = true;
      for (const auto& other : scene.objects) {
        const double min_dist = r + footprint_radius(other) + cfg.clearance;
        const double dx = x - other.pose.position.x;
        const double dy = y - other.pose.position.y;
        if (dx * dx + dy * dy < min_dist * min_dist) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      obj.pose.position = {x, y, cfg.table_height + object_height(obj) / 2.0};
      obj.pose.yaw = rng.uniform(0.0, 2.0 * std::numbers::pi);
      obj.yaw_canonical = wrap_yaw(obj.pose.yaw);
      scene.objects.push_back(obj);
      placed = true;
    }
    if (!placed) {
      throw SceneTooCrowded("could not place object " + std::to_string(i) +
                            " after 1000 attempts");
    }
  }
  return scene;
}

namespace {

struct SceneGeometry {
  std::vector<Point3> vertices;                 // world frame
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> triangle_object;             // object index per triangle
};

SceneGeometry scene_geometry(const SceneSpec& scene) {
  SceneGeometry g;
  for (std::size_t oi = 0; oi < scene.objects.size(); ++oi) {
    const auto& obj = scene.objects[oi];
    const TriMesh mesh = object_mesh(obj);
    const int base = static_cast<int>(g.vertices.size());
    for (const auto& v : mesh.vertices) {
      g.vertices.push_back(apply_pose(obj.pose, v));
    }
    for (const auto& t : mesh.triangles) {
      g.triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
      g.triangle_object.push_back(static_cast<int>(oi));
    }
  }
  return g;
}

}  // namespace

std::vector<PointCloudFrame> render_frames(const SceneSpec& scene, int n_frames,
                                           const NoiseSpec& noise, double sample_density) {
  if (n_frames < 1) throw std::invalid_argument("render_frames: n_frames must be >= 1");
  noise.validate();
  scene.intr.validate();
  scene.extr.validate();

  const SceneGeometry geo = scene_geometry(scene);
  const DepthImage depth =
      render_depth_world(geo.vertices, geo.triangles, scene.intr, scene.extr);
  const Point3 cam = scene.extr.camera_position();

  // Each frame is an independent surface measurement, like successive
  // sensor messages; accumulating frames therefore averages sampling noise.
  std::vector<PointCloudFrame> frames;
  frames.reserve(n_frames);
  for (int f = 0; f < n_frames; ++f) {
    SplitMix64 rng = SplitMix64::substream(scene.seed, kTagFrame + static_cast<std::uint64_t>(f));
    PointCloudFrame frame;
    frame.frame_index = f;

    for (std::size_t ti = 0; ti < geo.triangles.size(); ++ti) {
      const auto& t = geo.triangles[ti];
      const Point3& a = geo.vertices[t[0]];
      const Point3& b = geo.vertices[t[1]];
      const Point3& c = geo.vertices[t[2]];
      const Vec3 n = cross(b - a, c - a);
      if (dot(n, cam - a) <= 0.0) continue;  // back-facing

      const double area = 0.5 * norm(n);
      const double expected = area * sample_density;
      int count = static_cast<int>(std::floor(expected));
      if (rng.next_double() < expected - count) ++count;

      for (int s = 0; s < count; ++s) {
        const double su = std::sqrt(rng.next_double());
        const double tv = rng.next_double();
        const Point3 p = a * (1.0 - su) + b * (su * (1.0 - tv)) + c * (su * tv);
        const double u = rng.next_double();
        const double jx = rng.gaussian() * noise.point_sigma;
        const double jy = rng.gaussian() * noise.point_sigma;
        const double jz = rng.gaussian() * noise.point_sigma;

        const auto proj = project(p, scene.intr, scene.extr);
        if (!proj) continue;
        if (!depth.in_bounds(proj->px.u, proj->px.v)) continue;  // off-sensor
        if (proj->depth > depth.at(proj->px.u, proj->px.v) + kVisibilityEps) continue;
        if (u < noise.dropout) continue;
        frame.points.push_back({p.x + jx, p.y + jy, p.z + jz});
      }
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

GrayImage render_edge_photo(const SceneSpec& scene, const NoiseSpec& noise) {
  noise.validate();
  scene.intr.validate();
  scene.extr.validate();

  const SceneGeometry geo = scene_geometry(scene);

  // Coverage-weighted silhouettes: rasterize at kPhotoSupersample times the
  // photo resolution and average, like a real camera's pixel footprint.
  constexpr int kPhotoSupersample = 4;
  CameraIntrinsics fine = scene.intr;
  fine.fx *= kPhotoSupersample;
  fine.fy *= kPhotoSupersample;
  fine.cx = kPhotoSupersample * scene.intr.cx + (kPhotoSupersample - 1) * 0.5;
  fine.cy = kPhotoSupersample * scene.intr.cy + (kPhotoSupersample - 1) * 0.5;
  fine.width = kPhotoSupersample * scene.intr.width;
  fine.height = kPhotoSupersample * scene.intr.height;
  const DepthImage depth = render_depth_world(geo.vertices, geo.triangles, fine, scene.extr);

  GrayImage photo(scene.intr.width, scene.intr.height, kBackgroundGray);
  for (int y = 0; y < photo.height; ++y) {
    for (int x = 0; x < photo.width; ++x) {
      int covered = 0;
      for (int sy = 0; sy < kPhotoSupersample; ++sy) {
        for (int sx = 0; sx < kPhotoSupersample; ++sx) {
          if (std::isfinite(depth.at(kPhotoSupersample * x + sx, kPhotoSupersample * y + sy))) {
            ++covered;
          }
        }
      }
      if (covered > 0) {
        const double frac = double(covered) / (kPhotoSupersample * kPhotoSupersample);
        photo.at(x, y) = static_cast<std::uint8_t>(
            std::lround(kBackgroundGray + (kObjectGray - kBackgroundGray) * frac));
      }
    }
  }

  const std::size_t n_pixels = photo.values.size();
  const auto n_speckle = static_cast<std::size_t>(
      std::llround(noise.speckle_density * static_cast<double>(n_pixels)));
  if (n_speckle > 0) {
    SplitMix64 rng = SplitMix64::substream(scene.seed, kTagSpeckle);
    // Partial Fisher-Yates for distinct pixel indices.
    std::vector<std::uint32_t> idx(n_pixels);
    std::iota(idx.begin(), idx.end(), 0u);
    for (std::size_t i = 0; i < n_speckle; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(n_pixels - i));
      std::swap(idx[i], idx[j]);
      int v = kSpeckleLo + static_cast<int>(rng.below(kSpeckleHi - kSpeckleLo + 1));
      // An overwrite must visibly change the pixel.
      if (v == photo.values[idx[i]]) v = v < kSpeckleHi ? v + 1 : v - 1;
      photo.values[idx[i]] = static_cast<std::uint8_t>(v);
    }
  }
  return photo;
}

// --- scene JSON ---------------------------------------------------------

namespace {

ordered_json dims_to_json(const ObjectDims& dims) {
  struct Visitor {
    ordered_json operator()(const NutParams& p) const {
      return {{"across_flats", p.across_flats},
              {"height", p.height},
              {"bore_radius", p.bore_radius},
              {"samples_per_meter", p.samples_per_meter}};
    }
    ordered_json operator()(const ScrewParams& p) const {
      return {{"head_across_flats", p.head_across_flats},
              {"head_height", p.head_height},
              {"shaft_radius", p.shaft_radius},
              {"total_height", p.total_height}};
    }
    ordered_json operator()(const WasherParams& p) const {
      return {{"outer_radius", p.outer_radius},
              {"bore_radius", p.bore_radius},
              {"height", p.height}};
    }
    ordered_json operator()(const PlaceholderParams& p) const {
      return {{"side", p.side}, {"height", p.height}};
    }
  };
  return std::visit(Visitor{}, dims);
}

ObjectDims dims_from_json(ObjectKind kind, const ordered_json& j) {
  switch (kind) {
    case ObjectKind::Nut: {
      NutParams p;
      p.across_flats = j.at("across_flats").get<double>();
      p.height = j.at("height").get<double>();
      p.bore_radius = j.at("bore_radius").get<double>();
      p.samples_per_meter = j.at("samples_per_meter").get<double>();
      return p;
    }
    case ObjectKind::Screw: {
      ScrewParams p;
      p.head_across_flats = j.at("head_across_flats").get<double>();
      p.head_height = j.at("head_height").get<double>();
      p.shaft_radius = j.at("shaft_radius").get<double>();
      p.total_height = j.at("total_height").get<double>();
      return p;
    }
    case ObjectKind::Washer: {
      WasherParams p;
      p.outer_radius = j.at("outer_radius").get<double>();
      p.bore_radius = j.at("bore_radius").get<double>();
      p.height = j.at("height").get<double>();
      return p;
    }
    case ObjectKind::Placeholder: {
      PlaceholderParams p;
      p.side = j.at("side").get<double>();
      p.height = j.at("height").get<double>();
      return p;
    }
  }
  throw std::invalid_argument("dims_from_json: bad kind");
}

}  // namespace

std::string scene_to_json(const SceneSpec& scene) {
  ordered_json j;
  j["seed"] = scene.seed;
  j["table_height"] = scene.table_height;
  ordered_json cam;
  cam["fx"] = scene.intr.fx;
  cam["fy"] = scene.intr.fy;
  cam["cx"] = scene.intr.cx;
  cam["cy"] = scene.intr.cy;
  cam["width"] = scene.intr.width;
  cam["height"] = scene.intr.height;
  ordered_json rot = ordered_json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot.push_back(scene.extr.rotation.m[r][c]);
  cam["rotation"] = std::move(rot);
  cam["translation"] = {scene.extr.translation.x, scene.extr.translation.y,
                        scene.extr.translation.z};
  j["camera"] = std::move(cam);

  ordered_json objs = ordered_json::array();
  for (const auto& o : scene.objects) {
    ordered_json jo;
    jo["kind"] = object_kind_name(o.kind);
    jo["pose"] = {{"x", o.pose.position.x},
                  {"y", o.pose.position.y},
                  {"z", o.pose.position.z},
                  {"yaw", o.pose.yaw}};
    jo["yaw_canonical"] = o.yaw_canonical;
    jo["dims"] = dims_to_json(o.dims);
    objs.push_back(std::move(jo));
  }
  j["objects"] = std::move(objs);
  return j.dump(2);
}

SceneSpec scene_from_json(std::string_view text) {
  try {
    const auto j = ordered_json::parse(text);
    SceneSpec scene;
    scene.seed = j.at("seed").get<std::uint64_t>();
    scene.table_height = j.at("table_height").get<double>();
    const auto& cam = j.at("camera");
    scene.intr.fx = cam.at("fx").get<double>();
    scene.intr.fy = cam.at("fy").get<double>();
    scene.intr.cx = cam.at("cx").get<double>();
    scene.intr.cy = cam.at("cy").get<double>();
    scene.intr.width = cam.at("width").get<int>();
    scene.intr.height = cam.at("height").get<int>();
    const auto& rot = cam.at("rotation");
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        scene.extr.rotation.m[r][c] = rot.at(r * 3 + c).get<double>();
      }
    const auto& tr = cam.at("translation");
    scene.extr.translation = {tr.at(0).get<double>(), tr.at(1).get<double>(),
                              tr.at(2).get<double>()};
    for (const auto& jo : j.at("objects")) {
      ObjectSpec o;
      o.kind = object_kind_from_name(jo.at("kind").get<std::string>());
      const auto& pose = jo.at("pose");
      o.pose.position = {pose.at("x").get<double>(), pose.at("y").get<double>(),
                         pose.at("z").get<double>()};
      o.pose.yaw = pose.at("yaw").get<double>();
      o.yaw_canonical = jo.at("yaw_canonical").get<double>();
      o.dims = dims_from_json(o.kind, jo.at("dims"));
      scene.objects.push_back(std::move(o));
    }
    return scene;
  } catch (const ordered_json::exception& e) {
    throw ParseError(std::string("scene JSON: ") + e.what(), 0);
  }
}

}  // namespace nutpose
