#include "nutpose/commands.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "nutpose/errors.hpp"
#include "nutpose/imaging.hpp"
#include "nutpose/matching.hpp"

namespace nutpose {

using ordered_json = nlohmann::ordered_json;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write to " + path.string());
}

}  // namespace

std::string clusters_to_json(const std::vector<ClusterRecord>& records) {
  ordered_json arr = ordered_json::array();
  for (const auto& r : records) {
    ordered_json j;
    j["id"] = r.id;
    j["label"] = cluster_label_name(r.label);
    j["points"] = r.point_count;
    j["centroid"] = {r.centroid.x, r.centroid.y, r.centroid.z};
    j["bbox_dims"] = {r.bbox_dims.x, r.bbox_dims.y, r.bbox_dims.z};
    arr.push_back(std::move(j));
  }
  return arr.dump(2);
}

std::vector<ClusterRecord> clusters_from_json(std::string_view text) {
  try {
    const auto arr = ordered_json::parse(text);
    if (!arr.is_array()) throw ParseError("clusters JSON: expected an array", 0);
    std::vector<ClusterRecord> out;
    for (const auto& j : arr) {
      ClusterRecord r;
      r.id = j.at("id").get<int>();
      r.label = cluster_label_from_name(j.at("label").get<std::string>());
      r.point_count = j.at("points").get<long>();
      const auto& c = j.at("centroid");
      r.centroid = {c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>()};
      const auto& b = j.at("bbox_dims");
      r.bbox_dims = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>()};
      out.push_back(r);
    }
    return out;
  } catch (const ordered_json::exception& e) {
    throw ParseError(std::string("clusters JSON: ") + e.what(), 0);
  }
}

ExitStatus cmd_synth(const SynthOptions& opts, const PipelineConfig& cfg) {
  try {
    cfg.validate();
    opts.noise.validate();
    const SceneConfig sc = make_scene_config(cfg);
    const SceneSpec scene = generate_scene(opts.nuts, opts.distractors, opts.seed, sc);
    const auto frames = render_frames(scene, cfg.filter.n_frames, opts.noise, sc.sample_density);
    const GrayImage photo = render_edge_photo(scene, opts.noise);

    std::filesystem::create_directories(opts.out_dir);
    write_file(opts.out_dir / "scene.json", scene_to_json(scene));
    write_frame_dir(opts.out_dir, frames);
    write_file(opts.out_dir / "photo.pgm", encode_pgm(photo));

    ordered_json truth = ordered_json::array();
    for (const auto& o : scene.objects) {
      if (o.kind != ObjectKind::Nut) continue;
      ordered_json j;
      j["position"] = {o.pose.position.x, o.pose.position.y, o.pose.position.z};
      j["yaw"] = o.pose.yaw;
      j["yaw_canonical"] = o.yaw_canonical;
      truth.push_back(std::move(j));
    }
    write_file(opts.out_dir / "truth.json", truth.dump(2));
    return ExitStatus::Ok;
  } catch (const SceneTooCrowded& e) {
    std::cerr << "synth: " << e.what() << "\n";
    return ExitStatus::UsageError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "synth: " << e.what() << "\n";
    return ExitStatus::UsageError;
  } catch (const std::exception& e) {
    std::cerr << "synth: " << e.what() << "\n";
    return ExitStatus::BadInput;
  }
}

ExitStatus cmd_preprocess(const std::filesystem::path& frames_dir, const PipelineConfig& cfg,
                          const std::filesystem::path& out_path) {
  try {
    cfg.validate();
    std::vector<PointCloudFrame> frames;
    try {
      frames = read_frame_dir(frames_dir);
    } catch (const std::exception& e) {
      std::cerr << "preprocess: " << e.what() << "\n";
      return ExitStatus::BadInput;
    }

    const AccumulateResult acc = accumulate(frames, cfg.filter.n_frames);
    if (acc.short_input) {
      std::cerr << "preprocess: warning: only " << frames.size() << " frames available, "
                << cfg.filter.n_frames << " requested\n";
    }
    const PointCloudFrame stripped = strip_by_height(acc.frame, cfg.filter);
    auto clusters = cluster_points(stripped, cfg.filter.distance_tolerance);
    clusters = filter_min_points(clusters, cfg.filter.min_points);
    clusters = merge_by_centroid(clusters, cfg.filter.centroid_merge_dist);

    std::vector<ClusterRecord> records;
    int n_nuts = 0;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      ClusterRecord r;
      r.id = static_cast<int>(i);
      r.label = classify_cluster(clusters[i], cfg.filter);
      r.point_count = static_cast<long>(clusters[i].points.size());
      r.centroid = clusters[i].centroid;
      if (r.label == ClusterLabel::Nut) {
        r.centroid = fix_centroid_z(r.centroid, cfg.filter);
        ++n_nuts;
      }
      r.bbox_dims = clusters[i].bbox_dims;
      records.push_back(r);
    }
    write_file(out_path, clusters_to_json(records));
    if (n_nuts == 0) {
      std::cerr << "preprocess: no nut candidates found\n";
      return ExitStatus::NoNuts;
    }
    return ExitStatus::Ok;
  } catch (const ParseError& e) {
    std::cerr << "preprocess: " << e.what() << "\n";
    return ExitStatus::BadInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "preprocess: " << e.what() << "\n";
    return ExitStatus::UsageError;
  } catch (const std::exception& e) {
    std::cerr << "preprocess: " << e.what() << "\n";
    return ExitStatus::BadInput;
  }
}

ExitStatus cmd_estimate(const std::filesystem::path& clusters_path,
                        const std::filesystem::path& photo_path, const PipelineConfig& cfg,
                        const std::filesystem::path& out_path,
                        const std::optional<std::filesystem::path>& cache_dir) {
  try {
    cfg.validate();
    const auto records = clusters_from_json(read_file(clusters_path));
    const GrayImage photo = decode_pgm(read_file(photo_path));
    if (photo.width != cfg.camera.width || photo.height != cfg.camera.height) {
      std::cerr << "estimate: photo is " << photo.width << "x" << photo.height
                << " but the camera config says " << cfg.camera.width << "x"
                << cfg.camera.height << "\n";
      return ExitStatus::BadInput;
    }

    const BinaryEdgeImage edges = threshold(scharr_magnitude(photo), cfg.scharr_threshold);
    const CameraExtrinsics extr = cfg.extrinsics();
    const std::vector<double> yaws = cfg.grid.values();

    std::vector<ClusterRecord> nut_records;
    for (const auto& r : records) {
      if (r.label == ClusterLabel::Nut) nut_records.push_back(r);
    }

    std::vector<MatchReport> reports;
    if (!nut_records.empty()) {
      const EdgeModelRenderer renderer(cfg.nut, cfg.dihedral_threshold, cfg.camera, extr,
                                       cfg.silhouette_eps);
      if (cache_dir) std::filesystem::create_directories(*cache_dir);

      int nut_id = 0;
      for (const auto& r : nut_records) {
        EdgeModelSource source;
        PrerenderCache cache;
        if (cache_dir) {
          const std::uint64_t hash =
              compute_cache_hash(cfg.nut, cfg.camera, extr, r.centroid, yaws,
                                 cfg.dihedral_threshold, cfg.silhouette_eps);
          char name[32];
          std::snprintf(name, sizeof(name), "nut_%016llx.epc",
                        static_cast<unsigned long long>(hash));
          const auto cache_path = *cache_dir / name;
          bool loaded = false;
          if (std::filesystem::exists(cache_path)) {
            try {
              cache = load_prerender_cache(cache_path);
              loaded = cache.content_hash == hash;
            } catch (const ParseError& e) {
              std::cerr << "estimate: ignoring stale cache " << cache_path << ": "
                        << e.what() << "\n";
            }
          }
          if (!loaded) {
            cache = build_prerender_cache(cfg.nut, cfg.camera, extr, r.centroid, yaws,
                                          cfg.dihedral_threshold, cfg.silhouette_eps);
            save_prerender_cache(cache, cache_path);
          }
          source = [&renderer, cache = std::move(cache), centroid = r.centroid](double yaw) {
            if (const auto* pts = cache.lookup(yaw)) return *pts;
            return renderer.classify_at(centroid, yaw);
          };
        } else {
          source = [&renderer, centroid = r.centroid](double yaw) {
            return renderer.classify_at(centroid, yaw);
          };
        }

        try {
          reports.push_back(sweep_yaw(nut_id, r.centroid, source, edges, cfg.grid, cfg.hit));
        } catch (const NoScorablePoints& e) {
          std::cerr << "estimate: skipping nut cluster " << r.id << ": " << e.what() << "\n";
        }
        ++nut_id;
      }
    }

    write_file(out_path, reports_to_json(reports));
    if (reports.empty()) {
      std::cerr << "estimate: no nut candidates to score\n";
      return ExitStatus::NoNuts;
    }
    return ExitStatus::Ok;
  } catch (const ParseError& e) {
    std::cerr << "estimate: " << e.what() << "\n";
    return ExitStatus::BadInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "estimate: " << e.what() << "\n";
    return ExitStatus::UsageError;
  } catch (const std::exception& e) {
    std::cerr << "estimate: " << e.what() << "\n";
    return ExitStatus::BadInput;
  }
}

ExitStatus cmd_overlay(const std::filesystem::path& report_path,
                       const std::filesystem::path& photo_path, const PipelineConfig& cfg,
                       const std::filesystem::path& out_path) {
  try {
    cfg.validate();
    const auto reports = reports_from_json(read_file(report_path));
    const GrayImage photo = decode_pgm(read_file(photo_path));

    const EdgeModelRenderer renderer(cfg.nut, cfg.dihedral_threshold, cfg.camera,
                                     cfg.extrinsics(), cfg.silhouette_eps);
    std::vector<OverlayPoint> points;
    for (const auto& r : reports) {
      for (const auto& cp : renderer.classify_at(r.centroid, r.best_yaw)) {
        points.push_back({cp.px, cp.cls});
      }
    }
    write_file(out_path, encode_ppm_overlay(photo, points));
    return ExitStatus::Ok;
  } catch (const ParseError& e) {
    std::cerr << "overlay: " << e.what() << "\n";
    return ExitStatus::BadInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "overlay: " << e.what() << "\n";
    return ExitStatus::UsageError;
  } catch (const std::exception& e) {
    std::cerr << "overlay: " << e.what() << "\n";
    return ExitStatus::BadInput;
  }
}

}  // namespace nutpose
