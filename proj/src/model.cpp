#include "nutpose/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

#include "nutpose/errors.hpp"

namespace nutpose {

void NutParams::validate() const {
  if (!(bore_radius > 0.0) || !(across_flats > 2.0 * bore_radius)) {
    throw std::invalid_argument("NutParams: need across_flats > 2*bore_radius > 0");
  }
  if (!(height > 0.0)) {
    throw std::invalid_argument("NutParams: height must be positive");
  }
  if (!(samples_per_meter >= 100.0)) {
    throw std::invalid_argument("NutParams: samples_per_meter must be >= 100");
  }
}

namespace {

double triangle_area(const Point3& a, const Point3& b, const Point3& c) {
  return 0.5 * norm(cross(b - a, c - a));
}

}  // namespace

void TriMesh::validate() const {
  const int n = static_cast<int>(vertices.size());
  for (const auto& t : triangles) {
    for (int idx : t) {
      if (idx < 0 || idx >= n) {
        throw std::invalid_argument("TriMesh: vertex index out of range");
      }
    }
    if (triangle_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]) <= 1e-12) {
      throw std::invalid_argument("TriMesh: degenerate triangle");
    }
  }
}

namespace {

std::vector<Point3> ring(int n, double radius, double z, double phase = 0.0) {
  std::vector<Point3> pts;
  pts.reserve(n);
  for (int k = 0; k < n; ++k) {
    const double a = phase + 2.0 * std::numbers::pi * k / n;
    pts.push_back({radius * std::cos(a), radius * std::sin(a), z});
  }
  return pts;
}

// Triangulates the annulus between an outer n-gon ring and an inner m-gon
// ring at the same z by merging the two angle-sorted loops. `flip` reverses
// winding for the bottom cap.
void bridge_rings(std::vector<std::array<int, 3>>& tris, int outer_base, int n,
                  int inner_base, int m, bool flip) {
  int i = 0, j = 0;
  auto outer_angle = [n](int k) { return 2.0 * std::numbers::pi * k / n; };
  auto inner_angle = [m](int k) { return 2.0 * std::numbers::pi * k / m; };
  while (i < n || j < m) {
    const bool advance_outer =
        j >= m || (i < n && outer_angle(i + 1) <= inner_angle(j + 1) + 1e-12);
    std::array<int, 3> t;
    if (advance_outer) {
      t = {outer_base + i % n, outer_base + (i + 1) % n, inner_base + j % m};
      ++i;
    } else {
      t = {outer_base + i % n, inner_base + (j + 1) % m, inner_base + j % m};
      ++j;
    }
    if (flip) std::swap(t[1], t[2]);
    tris.push_back(t);
  }
}

void side_walls(std::vector<std::array<int, 3>>& tris, int top_base, int bottom_base,
                int n, bool inward) {
  for (int k = 0; k < n; ++k) {
    const int k1 = (k + 1) % n;
    std::array<int, 3> t1{top_base + k, bottom_base + k, bottom_base + k1};
    std::array<int, 3> t2{top_base + k, bottom_base + k1, top_base + k1};
    if (inward) {
      std::swap(t1[1], t1[2]);
      std::swap(t2[1], t2[2]);
    }
    tris.push_back(t1);
    tris.push_back(t2);
  }
}

}  // namespace

TriMesh make_prism(int n, double circumradius, double height) {
  TriMesh mesh;
  const double hz = height / 2.0;
  auto top = ring(n, circumradius, hz);
  auto bottom = ring(n, circumradius, -hz);
  mesh.vertices = top;
  mesh.vertices.insert(mesh.vertices.end(), bottom.begin(), bottom.end());
  side_walls(mesh.triangles, 0, n, n, false);
  // Caps as fans.
  for (int k = 1; k + 1 < n; ++k) {
    mesh.triangles.push_back({0, k, k + 1});          // top, +z
    mesh.triangles.push_back({n, n + k + 1, n + k});  // bottom, -z
  }
  return mesh;
}

TriMesh make_prism_with_bore(int n, double circumradius, double height,
                             double bore_radius, int bore_segments) {
  TriMesh mesh;
  const double hz = height / 2.0;
  const int m = bore_segments;
  auto outer_top = ring(n, circumradius, hz);
  auto outer_bottom = ring(n, circumradius, -hz);
  auto bore_top = ring(m, bore_radius, hz);
  auto bore_bottom = ring(m, bore_radius, -hz);

  mesh.vertices = outer_top;  // [0, n)
  mesh.vertices.insert(mesh.vertices.end(), outer_bottom.begin(), outer_bottom.end());  // [n, 2n)
  mesh.vertices.insert(mesh.vertices.end(), bore_top.begin(), bore_top.end());          // [2n, 2n+m)
  mesh.vertices.insert(mesh.vertices.end(), bore_bottom.begin(), bore_bottom.end());    // [2n+m, 2n+2m)

  const int ot = 0, ob = n, bt = 2 * n, bb = 2 * n + m;
  side_walls(mesh.triangles, ot, ob, n, false);
  side_walls(mesh.triangles, bt, bb, m, true);  // bore wall normals face the axis
  bridge_rings(mesh.triangles, ot, n, bt, m, false);  // top cap
  bridge_rings(mesh.triangles, ob, n, bb, m, true);   // bottom cap
  return mesh;
}

TriMesh make_box(double sx, double sy, double sz) {
  TriMesh mesh;
  const double x = sx / 2.0, y = sy / 2.0, z = sz / 2.0;
  mesh.vertices = {{-x, -y, -z}, {x, -y, -z}, {x, y, -z}, {-x, y, -z},
                   {-x, -y, z},  {x, -y, z},  {x, y, z},  {-x, y, z}};
  mesh.triangles = {
      {0, 2, 1}, {0, 3, 2},  // -z
      {4, 5, 6}, {4, 6, 7},  // +z
      {0, 1, 5}, {0, 5, 4},  // -y
      {2, 3, 7}, {2, 7, 6},  // +y
      {1, 2, 6}, {1, 6, 5},  // +x
      {3, 0, 4}, {3, 4, 7},  // -x
  };
  return mesh;
}

TriMesh translate_mesh(TriMesh mesh, const Vec3& offset) {
  for (auto& v : mesh.vertices) v = v + offset;
  return mesh;
}

TriMesh merge_meshes(const TriMesh& a, const TriMesh& b) {
  TriMesh out = a;
  const int base = static_cast<int>(a.vertices.size());
  out.vertices.insert(out.vertices.end(), b.vertices.begin(), b.vertices.end());
  for (const auto& t : b.triangles) {
    out.triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
  }
  return out;
}

TriMesh build_hex_nut(const NutParams& params) {
  params.validate();
  const double circumradius = (params.across_flats / 2.0) / std::cos(std::numbers::pi / 6.0);
  TriMesh mesh = make_prism_with_bore(6, circumradius, params.height,
                                      params.bore_radius, kBoreSegments);
  mesh.validate();
  return mesh;
}

TriMesh load_obj(std::string_view text) {
  TriMesh mesh;
  std::size_t line_no = 0;
  std::size_t pos = 0;

  auto fail = [&](const std::string& msg) -> void {
    throw ParseError("OBJ: " + msg + " on line " + std::to_string(line_no), line_no);
  };

  while (pos < text.size()) {
    ++line_no;
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    // Tokenize on spaces/tabs.
    std::vector<std::string_view> tokens;
    std::size_t t = 0;
    while (t < line.size()) {
      while (t < line.size() && (line[t] == ' ' || line[t] == '\t')) ++t;
      std::size_t s = t;
      while (t < line.size() && line[t] != ' ' && line[t] != '\t') ++t;
      if (t > s) tokens.push_back(line.substr(s, t - s));
    }
    if (tokens.empty() || tokens[0][0] == '#') continue;

    if (tokens[0] == "v") {
      if (tokens.size() != 4) fail("vertex line needs exactly 3 coordinates");
      Point3 p;
      double* coords[3] = {&p.x, &p.y, &p.z};
      for (int i = 0; i < 3; ++i) {
        const auto tok = tokens[i + 1];
        const auto [next, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), *coords[i]);
        if (ec != std::errc() || next != tok.data() + tok.size()) fail("malformed number");
      }
      mesh.vertices.push_back(p);
    } else if (tokens[0] == "f") {
      if (tokens.size() != 4) fail("only triangular faces are supported");
      std::array<int, 3> tri;
      for (int i = 0; i < 3; ++i) {
        const auto tok = tokens[i + 1];
        int idx = 0;
        const auto [next, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), idx);
        if (ec != std::errc() || next != tok.data() + tok.size()) fail("malformed face index");
        if (idx < 1 || idx > static_cast<int>(mesh.vertices.size())) {
          fail("face index out of range");
        }
        tri[i] = idx - 1;
      }
      mesh.triangles.push_back(tri);
    }
    // All other line types (vn, vt, o, g, s, usemtl, mtllib, ...) are ignored.
  }
  return mesh;
}

std::vector<FeatureEdge> find_feature_edges(const TriMesh& mesh, double dihedral_threshold) {
  struct EdgeInfo {
    int count = 0;
    int tri[2] = {-1, -1};
  };
  std::map<std::pair<int, int>, EdgeInfo> edges;
  for (std::size_t ti = 0; ti < mesh.triangles.size(); ++ti) {
    const auto& t = mesh.triangles[ti];
    for (int e = 0; e < 3; ++e) {
      int a = t[e], b = t[(e + 1) % 3];
      if (a > b) std::swap(a, b);
      auto& info = edges[{a, b}];
      if (info.count < 2) info.tri[info.count] = static_cast<int>(ti);
      ++info.count;
    }
  }

  auto normal_of = [&](int ti) {
    const auto& t = mesh.triangles[ti];
    return normalized(cross(mesh.vertices[t[1]] - mesh.vertices[t[0]],
                            mesh.vertices[t[2]] - mesh.vertices[t[0]]));
  };

  std::vector<FeatureEdge> out;
  for (const auto& [key, info] : edges) {
    if (info.count == 1) {
      out.push_back({key.first, key.second, StaticEdgeTag::Boundary});
    } else if (info.count == 2) {
      const Vec3 n0 = normal_of(info.tri[0]);
      const Vec3 n1 = normal_of(info.tri[1]);
      const double c = std::clamp(dot(n0, n1), -1.0, 1.0);
      // Crease angle: 0 for coplanar neighbors, pi/2 for a box rim.
      if (std::acos(c) > dihedral_threshold) {
        out.push_back({key.first, key.second, StaticEdgeTag::Sharp});
      }
    }
    // Non-manifold edges (count > 2) are not feature-tagged.
  }
  return out;
}

std::vector<EdgeSample> sample_feature_edges(const TriMesh& mesh,
                                             const std::vector<FeatureEdge>& edges,
                                             double samples_per_meter) {
  std::vector<EdgeSample> samples;
  for (const auto& e : edges) {
    const Point3 a = mesh.vertices[e.a];
    const Point3 b = mesh.vertices[e.b];
    const double len = distance(a, b);
    const int count = static_cast<int>(std::ceil(len * samples_per_meter)) + 1;
    for (int i = 0; i < count; ++i) {
      const double t = count > 1 ? static_cast<double>(i) / (count - 1) : 0.0;
      samples.push_back({a + (b - a) * t, e.tag});
    }
  }
  return samples;
}

std::vector<EdgeSample> extract_feature_edges(const TriMesh& mesh, double dihedral_threshold,
                                              double samples_per_meter) {
  return sample_feature_edges(mesh, find_feature_edges(mesh, dihedral_threshold),
                              samples_per_meter);
}

namespace {

void raster_triangle(DepthImage& img, const ContinuousProjection& a,
                     const ContinuousProjection& b, const ContinuousProjection& c) {
  const double area = (b.u - a.u) * (c.v - a.v) - (b.v - a.v) * (c.u - a.u);
  if (std::abs(area) < 1e-12) return;

  int x0 = static_cast<int>(std::floor(std::min({a.u, b.u, c.u})));
  int x1 = static_cast<int>(std::ceil(std::max({a.u, b.u, c.u})));
  int y0 = static_cast<int>(std::floor(std::min({a.v, b.v, c.v})));
  int y1 = static_cast<int>(std::ceil(std::max({a.v, b.v, c.v})));
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  x1 = std::min(x1, img.width - 1);
  y1 = std::min(y1, img.height - 1);

  const double inv_za = 1.0 / a.depth;
  const double inv_zb = 1.0 / b.depth;
  const double inv_zc = 1.0 / c.depth;

  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double px = x, py = y;  // pixel centers sit on integer coordinates
      double w0 = (b.u - a.u) * (py - a.v) - (b.v - a.v) * (px - a.u);
      double w1 = (c.u - b.u) * (py - b.v) - (c.v - b.v) * (px - b.u);
      double w2 = (a.u - c.u) * (py - c.v) - (a.v - c.v) * (px - c.u);
      // Accept both windings; edge-on pixels land in both neighbors and the
      // z-buffer keeps the minimum.
      const bool inside = (w0 >= 0 && w1 >= 0 && w2 >= 0) || (w0 <= 0 && w1 <= 0 && w2 <= 0);
      if (!inside) continue;
      // 1/z interpolates linearly in screen space.
      const double l0 = w1 / area, l1 = w2 / area, l2 = w0 / area;
      const double inv_z = l0 * inv_za + l1 * inv_zb + l2 * inv_zc;
      if (inv_z <= 0.0) continue;
      const double z = 1.0 / inv_z;
      double& d = img.at(x, y);
      if (z < d) d = z;
    }
  }
}

}  // namespace

DepthImage render_depth_world(const std::vector<Point3>& vertices,
                              const std::vector<std::array<int, 3>>& triangles,
                              const CameraIntrinsics& intr, const CameraExtrinsics& extr) {
  DepthImage img(intr.width, intr.height);
  std::vector<ContinuousProjection> proj(vertices.size());
  std::vector<char> ok(vertices.size(), 0);
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    if (auto p = project_continuous(vertices[i], intr, extr)) {
      proj[i] = *p;
      ok[i] = 1;
    }
  }
  for (const auto& t : triangles) {
    if (!ok[t[0]] || !ok[t[1]] || !ok[t[2]]) continue;
    raster_triangle(img, proj[t[0]], proj[t[1]], proj[t[2]]);
  }
  return img;
}

DepthImage render_depth(const TriMesh& mesh, const Pose& pose, const CameraIntrinsics& intr,
                        const CameraExtrinsics& extr) {
  std::vector<Point3> world(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    world[i] = apply_pose(pose, mesh.vertices[i]);
  }
  return render_depth_world(world, mesh.triangles, intr, extr);
}

std::vector<ClassifiedEdgePoint> classify_edges(const std::vector<EdgeSample>& samples,
                                                const Pose& pose,
                                                const CameraIntrinsics& intr,
                                                const CameraExtrinsics& extr,
                                                const DepthImage& depth,
                                                double silhouette_eps) {
  if (depth.width != intr.width || depth.height != intr.height) {
    throw std::invalid_argument("classify_edges: depth image does not match the camera");
  }
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<ClassifiedEdgePoint> out;
  out.reserve(samples.size());

  for (const auto& s : samples) {
    const auto proj = project(apply_pose(pose, s.position), intr, extr);
    if (!proj) continue;  // behind the camera

    ClassifiedEdgePoint cp;
    cp.px = proj->px;
    cp.depth = proj->depth;

    if (s.tag == StaticEdgeTag::Boundary) {
      cp.cls = EdgeClass::Boundary;
      out.push_back(cp);
      continue;
    }

    const double d_img =
        depth.in_bounds(cp.px.u, cp.px.v) ? depth.at(cp.px.u, cp.px.v) : inf;
    if (cp.depth > d_img + silhouette_eps) {
      cp.cls = EdgeClass::Occluded;
    } else {
      bool on_silhouette = false;
      for (int dv = -1; dv <= 1 && !on_silhouette; ++dv) {
        for (int du = -1; du <= 1; ++du) {
          const int u = cp.px.u + du, v = cp.px.v + dv;
          const double d = depth.in_bounds(u, v) ? depth.at(u, v) : inf;
          if (d == inf) {
            on_silhouette = true;
            break;
          }
        }
      }
      cp.cls = on_silhouette ? EdgeClass::Occluding : EdgeClass::HighCurvature;
    }
    out.push_back(cp);
  }
  return out;
}

EdgeModelRenderer::EdgeModelRenderer(const NutParams& nut, double dihedral_threshold,
                                     const CameraIntrinsics& intrinsics,
                                     const CameraExtrinsics& extrinsics, double eps)
    : mesh(build_hex_nut(nut)),
      samples(extract_feature_edges(mesh, dihedral_threshold, nut.samples_per_meter)),
      intr(intrinsics),
      extr(extrinsics),
      silhouette_eps(eps) {}

std::vector<ClassifiedEdgePoint> EdgeModelRenderer::classify_at(const Point3& centroid,
                                                                double yaw) const {
  const Pose pose{centroid, yaw};
  const DepthImage depth = render_depth(mesh, pose, intr, extr);
  return classify_edges(samples, pose, intr, extr, depth, silhouette_eps);
}

const std::vector<ClassifiedEdgePoint>* PrerenderCache::lookup(double yaw) const {
  for (std::size_t i = 0; i < yaws.size(); ++i) {
    if (yaws[i] == yaw) return &entries[i];
  }
  return nullptr;
}

namespace {

struct Fnv1a {
  std::uint64_t h = 1469598103934665603ull;

  void feed_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  }
  void feed(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    feed_bytes(&bits, sizeof(bits));
  }
  void feed(int v) {
    const std::int64_t w = v;
    feed_bytes(&w, sizeof(w));
  }
};

}  // namespace

std::uint64_t compute_cache_hash(const NutParams& nut, const CameraIntrinsics& intr,
                                 const CameraExtrinsics& extr, const Point3& centroid,
                                 const std::vector<double>& yaws,
                                 double dihedral_threshold, double silhouette_eps) {
  Fnv1a f;
  f.feed(nut.across_flats);
  f.feed(nut.height);
  f.feed(nut.bore_radius);
  f.feed(nut.samples_per_meter);
  f.feed(intr.fx);
  f.feed(intr.fy);
  f.feed(intr.cx);
  f.feed(intr.cy);
  f.feed(intr.width);
  f.feed(intr.height);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) f.feed(extr.rotation.m[i][j]);
  f.feed(extr.translation.x);
  f.feed(extr.translation.y);
  f.feed(extr.translation.z);
  f.feed(centroid.x);
  f.feed(centroid.y);
  f.feed(centroid.z);
  f.feed(static_cast<int>(yaws.size()));
  for (double y : yaws) f.feed(y);
  f.feed(dihedral_threshold);
  f.feed(silhouette_eps);
  return f.h;
}

PrerenderCache build_prerender_cache(const NutParams& nut, const CameraIntrinsics& intr,
                                     const CameraExtrinsics& extr, const Point3& centroid,
                                     const std::vector<double>& yaws,
                                     double dihedral_threshold, double silhouette_eps) {
  if (yaws.empty()) {
    throw std::invalid_argument("build_prerender_cache: yaw grid must be non-empty");
  }
  const EdgeModelRenderer renderer(nut, dihedral_threshold, intr, extr, silhouette_eps);
  PrerenderCache cache;
  cache.content_hash =
      compute_cache_hash(nut, intr, extr, centroid, yaws, dihedral_threshold, silhouette_eps);
  cache.yaws = yaws;
  cache.entries.reserve(yaws.size());
  for (double yaw : yaws) {
    cache.entries.push_back(renderer.classify_at(centroid, yaw));
  }
  return cache;
}

namespace {

constexpr char kCacheMagic[8] = {'N', 'P', 'E', 'P', 'C', '0', '0', '1'};

template <typename T>
void put(std::string& out, const T& v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get(std::string_view bytes, std::size_t& pos) {
  if (pos + sizeof(T) > bytes.size()) {
    throw ParseError("cache: truncated at byte " + std::to_string(pos), pos);
  }
  T v;
  std::memcpy(&v, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::string encode_prerender_cache(const PrerenderCache& cache) {
  std::string out;
  out.append(kCacheMagic, sizeof(kCacheMagic));
  put<std::uint64_t>(out, cache.content_hash);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cache.yaws.size()));
  for (std::size_t i = 0; i < cache.yaws.size(); ++i) {
    put<double>(out, cache.yaws[i]);
    const auto& pts = cache.entries[i];
    put<std::uint32_t>(out, static_cast<std::uint32_t>(pts.size()));
    for (const auto& p : pts) {
      put<std::int32_t>(out, p.px.u);
      put<std::int32_t>(out, p.px.v);
      put<double>(out, p.depth);
      put<std::uint8_t>(out, static_cast<std::uint8_t>(p.cls));
    }
  }
  return out;
}

PrerenderCache decode_prerender_cache(std::string_view bytes) {
  if (bytes.size() < sizeof(kCacheMagic) ||
      std::memcmp(bytes.data(), kCacheMagic, sizeof(kCacheMagic)) != 0) {
    throw ParseError("cache: bad magic at byte 0", 0);
  }
  std::size_t pos = sizeof(kCacheMagic);
  PrerenderCache cache;
  cache.content_hash = get<std::uint64_t>(bytes, pos);
  const auto n = get<std::uint32_t>(bytes, pos);
  cache.yaws.reserve(n);
  cache.entries.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    cache.yaws.push_back(get<double>(bytes, pos));
    const auto count = get<std::uint32_t>(bytes, pos);
    std::vector<ClassifiedEdgePoint> pts;
    pts.reserve(count);
    for (std::uint32_t k = 0; k < count; ++k) {
      ClassifiedEdgePoint p;
      p.px.u = get<std::int32_t>(bytes, pos);
      p.px.v = get<std::int32_t>(bytes, pos);
      p.depth = get<double>(bytes, pos);
      const auto cls = get<std::uint8_t>(bytes, pos);
      if (cls > 3) {
        throw ParseError("cache: bad edge class at byte " + std::to_string(pos - 1), pos - 1);
      }
      p.cls = static_cast<EdgeClass>(cls);
      pts.push_back(p);
    }
    cache.entries.push_back(std::move(pts));
  }
  if (pos != bytes.size()) {
    throw ParseError("cache: trailing bytes at byte " + std::to_string(pos), pos);
  }
  return cache;
}

void save_prerender_cache(const PrerenderCache& cache, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write cache file " + path.string());
  const std::string bytes = encode_prerender_cache(cache);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

PrerenderCache load_prerender_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read cache file " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_prerender_cache(bytes);
}

}  // namespace nutpose
