#include "nutpose/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "nutpose/errors.hpp"

namespace nutpose {

PipelineConfig PipelineConfig::defaults() {
  PipelineConfig cfg;
  // filter, nut, hit and grid defaults come from their own initializers.
  cfg.camera.fx = 2000.0;
  cfg.camera.fy = 2000.0;
  cfg.camera.cx = 512.0;
  cfg.camera.cy = 384.0;
  cfg.camera.width = 1024;
  cfg.camera.height = 768;
  // Side-mounted camera: left of the table center, above the support
  // plane, pitched at the table center.
  cfg.camera_pos = {-1.0, 0.0, cfg.filter.table_height + 0.6};
  cfg.camera_target = {0.0, 0.0, cfg.filter.table_height};
  return cfg;
}

void PipelineConfig::validate() const {
  filter.validate();
  nut.validate();
  camera.validate();
  hit.validate();
  grid.validate();
  if (!finite(camera_pos) || !finite(camera_target)) {
    throw std::invalid_argument("config: camera position/target must be finite");
  }
  if (norm(camera_target - camera_pos) < 1e-9) {
    throw std::invalid_argument("config: camera position and target coincide");
  }
  if (!(scharr_threshold >= 0.0)) {
    throw std::invalid_argument("config: scharr.threshold must be >= 0");
  }
  if (!(dihedral_threshold > 0.0 && dihedral_threshold < std::numbers::pi)) {
    throw std::invalid_argument("config: model.dihedral_threshold out of range");
  }
  if (!(silhouette_eps > 0.0)) {
    throw std::invalid_argument("config: model.silhouette_eps must be positive");
  }
  extrinsics().validate();
}

namespace {

struct KeyTable {
  std::map<std::string, double*> doubles;
  std::map<std::string, int*> ints;

  void bind(PipelineConfig& cfg) {
    doubles = {
        {"filter.min_heights", &cfg.filter.min_heights},
        {"filter.max_heights", &cfg.filter.max_heights},
        {"filter.distance_tolerance", &cfg.filter.distance_tolerance},
        {"filter.centroid_merge_dist", &cfg.filter.centroid_merge_dist},
        {"filter.table_height", &cfg.filter.table_height},
        {"filter.nut_height", &cfg.filter.nut_height},
        {"filter.nut_ref_dx", &cfg.filter.nut_ref_dims.x},
        {"filter.nut_ref_dy", &cfg.filter.nut_ref_dims.y},
        {"filter.nut_ref_dz", &cfg.filter.nut_ref_dims.z},
        {"filter.dim_tolerance", &cfg.filter.dim_tolerance},
        {"nut.across_flats", &cfg.nut.across_flats},
        {"nut.height", &cfg.nut.height},
        {"nut.bore_radius", &cfg.nut.bore_radius},
        {"nut.samples_per_meter", &cfg.nut.samples_per_meter},
        {"camera.fx", &cfg.camera.fx},
        {"camera.fy", &cfg.camera.fy},
        {"camera.cx", &cfg.camera.cx},
        {"camera.cy", &cfg.camera.cy},
        {"camera.pos_x", &cfg.camera_pos.x},
        {"camera.pos_y", &cfg.camera_pos.y},
        {"camera.pos_z", &cfg.camera_pos.z},
        {"camera.target_x", &cfg.camera_target.x},
        {"camera.target_y", &cfg.camera_target.y},
        {"camera.target_z", &cfg.camera_target.z},
        {"match.hit_threshold", &cfg.hit.hit_threshold},
        {"grid.start", &cfg.grid.start},
        {"grid.end", &cfg.grid.end},
        {"grid.step", &cfg.grid.step},
        {"scharr.threshold", &cfg.scharr_threshold},
        {"model.dihedral_threshold", &cfg.dihedral_threshold},
        {"model.silhouette_eps", &cfg.silhouette_eps},
    };
    ints = {
        {"filter.min_points", &cfg.filter.min_points},
        {"filter.n_frames", &cfg.filter.n_frames},
        {"camera.width", &cfg.camera.width},
        {"camera.height", &cfg.camera.height},
    };
  }
};

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

}  // namespace

PipelineConfig parse_config(std::string_view text) {
  PipelineConfig cfg = PipelineConfig::defaults();
  KeyTable table;
  table.bind(cfg);

  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    ++line_no;
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    line = trim(line);
    if (line.empty() || line[0] == '#') continue;

    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key{trim(line.substr(0, eq))};
    const std::string_view value = trim(line.substr(eq + 1));

    if (auto it = table.doubles.find(key); it != table.doubles.end()) {
      const auto [next, ec] = std::from_chars(value.data(), value.data() + value.size(), *it->second);
      if (ec != std::errc() || next != value.data() + value.size()) {
        throw ConfigError("config line " + std::to_string(line_no) + ": bad number for " + key);
      }
    } else if (auto jt = table.ints.find(key); jt != table.ints.end()) {
      const auto [next, ec] = std::from_chars(value.data(), value.data() + value.size(), *jt->second);
      if (ec != std::errc() || next != value.data() + value.size()) {
        throw ConfigError("config line " + std::to_string(line_no) + ": bad integer for " + key);
      }
    } else {
      throw ConfigError("config line " + std::to_string(line_no) + ": unknown key " + key);
    }
  }

  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text);
}

std::string dump_config(const PipelineConfig& cfg) {
  PipelineConfig copy = cfg;  // non-const bind
  KeyTable table;
  table.bind(copy);

  // Dump in a stable, readable order: ints and doubles interleaved by key.
  std::map<std::string, std::string> lines;
  for (const auto& [key, ptr] : table.doubles) lines[key] = format_double(*ptr);
  for (const auto& [key, ptr] : table.ints) lines[key] = std::to_string(*ptr);

  std::ostringstream out;
  for (const auto& [key, value] : lines) {
    out << key << " = " << value << "\n";
  }
  return out.str();
}

SceneConfig make_scene_config(const PipelineConfig& cfg) {
  SceneConfig sc;
  sc.table_height = cfg.filter.table_height;
  sc.intr = cfg.camera;
  sc.extr = cfg.extrinsics();
  sc.nut = cfg.nut;
  return sc;
}

}  // namespace nutpose
