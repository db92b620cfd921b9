#include "nutpose/cloud.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "nutpose/errors.hpp"

namespace nutpose {

void FilterParams::validate() const {
  if (min_points < 1) throw std::invalid_argument("filter: min_points must be >= 1");
  if (!(min_heights >= 0.0) || !(min_heights < max_heights)) {
    throw std::invalid_argument("filter: need 0 <= min_heights < max_heights");
  }
  if (!(distance_tolerance > 0.0)) {
    throw std::invalid_argument("filter: distance_tolerance must be positive");
  }
  if (!(centroid_merge_dist > 0.0)) {
    throw std::invalid_argument("filter: centroid_merge_dist must be positive");
  }
  if (n_frames < 1) throw std::invalid_argument("filter: n_frames must be >= 1");
  if (!(nut_height > 0.0)) throw std::invalid_argument("filter: nut_height must be positive");
  if (!(dim_tolerance >= 0.0)) {
    throw std::invalid_argument("filter: dim_tolerance must be nonnegative");
  }
}

const char* cluster_label_name(ClusterLabel label) {
  switch (label) {
    case ClusterLabel::Nut:
      return "Nut";
    case ClusterLabel::Screw:
      return "Screw";
    case ClusterLabel::Washer:
      return "Washer";
    case ClusterLabel::Unknown:
      return "Unknown";
  }
  return "Unknown";
}

ClusterLabel cluster_label_from_name(std::string_view name) {
  if (name == "Nut") return ClusterLabel::Nut;
  if (name == "Screw") return ClusterLabel::Screw;
  if (name == "Washer") return ClusterLabel::Washer;
  return ClusterLabel::Unknown;
}

Cluster make_cluster(std::vector<Point3> points) {
  if (points.empty()) {
    throw std::invalid_argument("make_cluster: points must be non-empty");
  }
  Cluster c;
  c.points = std::move(points);
  Point3 sum;
  Point3 lo{std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity()};
  Point3 hi{-std::numeric_limits<double>::infinity(),
            -std::numeric_limits<double>::infinity(),
            -std::numeric_limits<double>::infinity()};
  for (const auto& p : c.points) {
    sum = sum + p;
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
  }
  const double n = static_cast<double>(c.points.size());
  c.centroid = {sum.x / n, sum.y / n, sum.z / n};
  c.bbox_dims = hi - lo;
  return c;
}

AccumulateResult accumulate(const std::vector<PointCloudFrame>& frames, int n_frames) {
  if (frames.empty()) {
    throw std::invalid_argument("accumulate: no frames");
  }
  if (n_frames < 1) {
    throw std::invalid_argument("accumulate: n_frames must be >= 1");
  }
  const std::size_t take = std::min<std::size_t>(frames.size(), static_cast<std::size_t>(n_frames));
  AccumulateResult r;
  r.short_input = take < static_cast<std::size_t>(n_frames);
  for (std::size_t i = 0; i < take; ++i) {
    r.frame.points.insert(r.frame.points.end(), frames[i].points.begin(),
                          frames[i].points.end());
  }
  return r;
}

PointCloudFrame strip_by_height(const PointCloudFrame& frame, const FilterParams& params) {
  params.validate();
  PointCloudFrame out;
  out.frame_index = frame.frame_index;
  out.points.reserve(frame.points.size());
  for (const auto& p : frame.points) {
    const double h = p.z - params.table_height;
    if (h >= params.min_heights && h <= params.max_heights) {
      out.points.push_back(p);
    }
  }
  return out;
}

namespace {

struct UnionFind {
  std::vector<int> parent;

  explicit UnionFind(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[b] = a;
    return true;
  }
};

std::vector<Cluster> components_to_clusters(const std::vector<Point3>& pts, UnionFind& uf) {
  // Group by root, clusters ordered by first member index.
  std::unordered_map<int, int> root_to_cluster;
  std::vector<std::vector<Point3>> groups;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const int r = uf.find(static_cast<int>(i));
    auto it = root_to_cluster.find(r);
    if (it == root_to_cluster.end()) {
      root_to_cluster.emplace(r, static_cast<int>(groups.size()));
      groups.emplace_back();
      groups.back().push_back(pts[i]);
    } else {
      groups[it->second].push_back(pts[i]);
    }
  }
  std::vector<Cluster> out;
  out.reserve(groups.size());
  for (auto& g : groups) out.push_back(make_cluster(std::move(g)));
  return out;
}

struct CellKey {
  long long x, y, z;
  bool operator==(const CellKey&) const = default;
};

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const {
    std::size_t h = 1469598103934665603ull;
    for (long long v : {k.x, k.y, k.z}) {
      h ^= static_cast<std::size_t>(v);
      h *= 1099511628211ull;
    }
    return h;
  }
};

// Grid-accelerated single linkage. Cell size is tol/sqrt(3), so any two
// points sharing a cell are automatically within tol; cross-cell pairs are
// checked up to two cells away, with early exit once two cells' components
// are already joined.
void grid_linkage(const std::vector<Point3>& pts, double tol, UnionFind& uf) {
  const double cell = tol / std::sqrt(3.0);
  const auto key_of = [cell](const Point3& p) {
    return CellKey{static_cast<long long>(std::floor(p.x / cell)),
                   static_cast<long long>(std::floor(p.y / cell)),
                   static_cast<long long>(std::floor(p.z / cell))};
  };

  std::unordered_map<CellKey, std::vector<int>, CellKeyHash> cells;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    cells[key_of(pts[i])].push_back(static_cast<int>(i));
  }

  const double tol2 = tol * tol;
  const int reach = static_cast<int>(std::ceil(tol / cell));  // = 2
  for (auto& [key, members] : cells) {
    for (std::size_t i = 1; i < members.size(); ++i) {
      uf.unite(members[0], members[i]);
    }
    for (int dx = -reach; dx <= reach; ++dx) {
      for (int dy = -reach; dy <= reach; ++dy) {
        for (int dz = -reach; dz <= reach; ++dz) {
          if (dx == 0 && dy == 0 && dz == 0) continue;
          const CellKey nk{key.x + dx, key.y + dy, key.z + dz};
          // Visit each unordered cell pair once.
          if (std::make_tuple(nk.x, nk.y, nk.z) < std::make_tuple(key.x, key.y, key.z)) {
            continue;
          }
          auto it = cells.find(nk);
          if (it == cells.end()) continue;
          const auto& other = it->second;
          bool joined = uf.find(members[0]) == uf.find(other[0]);
          if (joined) continue;
          for (int a : members) {
            for (int b : other) {
              const Vec3 d = pts[a] - pts[b];
              if (dot(d, d) <= tol2) {
                uf.unite(a, b);
                joined = true;
                break;
              }
            }
            if (joined) break;
          }
        }
      }
    }
  }
}

}  // namespace

std::vector<Cluster> cluster_points(const PointCloudFrame& frame, double distance_tolerance) {
  if (!(distance_tolerance > 0.0)) {
    throw std::invalid_argument("cluster_points: distance_tolerance must be positive");
  }
  const auto& pts = frame.points;
  if (pts.empty()) return {};

  UnionFind uf(pts.size());
  if (pts.size() > 2000) {
    grid_linkage(pts, distance_tolerance, uf);
  } else {
    const double tol2 = distance_tolerance * distance_tolerance;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      for (std::size_t j = i + 1; j < pts.size(); ++j) {
        const Vec3 d = pts[i] - pts[j];
        if (dot(d, d) <= tol2) uf.unite(static_cast<int>(i), static_cast<int>(j));
      }
    }
  }
  return components_to_clusters(pts, uf);
}

std::vector<Cluster> filter_min_points(const std::vector<Cluster>& clusters, int min_points) {
  std::vector<Cluster> out;
  for (const auto& c : clusters) {
    if (static_cast<int>(c.points.size()) >= min_points) out.push_back(c);
  }
  return out;
}

std::vector<Cluster> merge_by_centroid(const std::vector<Cluster>& clusters,
                                       double centroid_merge_dist) {
  if (!(centroid_merge_dist > 0.0)) {
    throw std::invalid_argument("merge_by_centroid: distance must be positive");
  }
  std::vector<Cluster> current = clusters;
  // A single transitive pass is not a fixpoint: merged clusters get new
  // centroids, which can land within range of yet another cluster.
  for (;;) {
    const std::size_t n = current.size();
    if (n <= 1) return current;

    UnionFind uf(n);
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (distance(current[i].centroid, current[j].centroid) <= centroid_merge_dist) {
          any |= uf.unite(static_cast<int>(i), static_cast<int>(j));
        }
      }
    }
    if (!any) return current;

    std::map<int, std::vector<Point3>> groups;  // keyed by root, ordered by first index
    std::map<int, int> first_index;
    for (std::size_t i = 0; i < n; ++i) {
      const int r = uf.find(static_cast<int>(i));
      auto& g = groups[r];
      if (g.empty()) first_index[r] = static_cast<int>(i);
      g.insert(g.end(), current[i].points.begin(), current[i].points.end());
    }
    std::vector<std::pair<int, std::vector<Point3>>> ordered;
    for (auto& [root, g] : groups) {
      ordered.emplace_back(first_index[root], std::move(g));
    }
    std::sort(ordered.begin(), ordered.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    std::vector<Cluster> merged;
    merged.reserve(ordered.size());
    for (auto& [idx, g] : ordered) merged.push_back(make_cluster(std::move(g)));
    current = std::move(merged);
  }
}

ClusterLabel classify_cluster(const Cluster& c, const FilterParams& params) {
  const Vec3& d = c.bbox_dims;
  const double tol = params.dim_tolerance;

  // Screw-height band: most of a screw up to a screw plus slack. Anything
  // taller matches nothing we expect on the table.
  constexpr double kScrewHeight = 0.12;
  if (d.z > kScrewHeight * 1.2) return ClusterLabel::Unknown;
  if (d.z > kScrewHeight * 0.9) return ClusterLabel::Screw;

  // Height stripping removes the bottom min_heights of any object resting
  // on the table, so compare against the observable extents.
  const double ref_z = std::max(params.nut_ref_dims.z - params.min_heights, 0.0);
  const bool z_match = std::abs(d.z - ref_z) <= tol;

  if (z_match && std::abs(d.x - params.nut_ref_dims.x) <= tol &&
      std::abs(d.y - params.nut_ref_dims.y) <= tol) {
    return ClusterLabel::Nut;
  }
  if (z_match && d.x > params.nut_ref_dims.x + tol && d.y > params.nut_ref_dims.y + tol) {
    return ClusterLabel::Washer;
  }
  return ClusterLabel::Unknown;
}

Point3 fix_centroid_z(const Point3& centroid, const FilterParams& params) {
  return {centroid.x, centroid.y, params.table_height + params.nut_height / 2.0};
}

PointCloudFrame parse_xyz(std::string_view text, int frame_index) {
  PointCloudFrame frame;
  frame.frame_index = frame_index;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    ++line_no;
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;

    // Trim trailing CR for tolerance of CRLF files.
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line[0] == '#') continue;

    Point3 p;
    double* coords[3] = {&p.x, &p.y, &p.z};
    const char* cur = line.data();
    const char* end = line.data() + line.size();
    for (int i = 0; i < 3; ++i) {
      while (cur < end && *cur == ' ') ++cur;
      auto [next, ec] = std::from_chars(cur, end, *coords[i]);
      if (ec != std::errc()) {
        throw ParseError("frame file: malformed number on line " + std::to_string(line_no),
                         line_no);
      }
      cur = next;
    }
    while (cur < end && *cur == ' ') ++cur;
    if (cur != end) {
      throw ParseError("frame file: trailing characters on line " + std::to_string(line_no),
                       line_no);
    }
    frame.points.push_back(p);
  }
  return frame;
}

namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

}  // namespace

std::string format_xyz(const PointCloudFrame& frame) {
  std::string out;
  out.reserve(frame.points.size() * 24);
  for (const auto& p : frame.points) {
    append_double(out, p.x);
    out.push_back(' ');
    append_double(out, p.y);
    out.push_back(' ');
    append_double(out, p.z);
    out.push_back('\n');
  }
  return out;
}

std::vector<PointCloudFrame> read_frame_dir(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::vector<std::pair<int, fs::path>> entries;
  if (!fs::is_directory(dir)) {
    throw std::runtime_error("frame directory not found: " + dir.string());
  }
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("frame_", 0) != 0 || e.path().extension() != ".xyz") continue;
    const std::string digits = name.substr(6, name.size() - 6 - 4);
    int idx = -1;
    const auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), idx);
    if (ec != std::errc() || p != digits.data() + digits.size()) continue;
    entries.emplace_back(idx, e.path());
  }
  if (entries.empty()) {
    throw std::runtime_error("no frame_*.xyz files in " + dir.string());
  }
  std::sort(entries.begin(), entries.end());

  std::vector<PointCloudFrame> frames;
  frames.reserve(entries.size());
  for (const auto& [idx, path] : entries) {
    std::ifstream in(path, std::ios::binary);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    frames.push_back(parse_xyz(text, idx));
  }
  return frames;
}

void write_frame_dir(const std::filesystem::path& dir,
                     const std::vector<PointCloudFrame>& frames) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%03zu.xyz", i);
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    out << format_xyz(frames[i]);
  }
}

}  // namespace nutpose
