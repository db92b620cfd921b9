#include "nutpose/matching.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "nutpose/errors.hpp"

namespace nutpose {

using ordered_json = nlohmann::ordered_json;

void HitParams::validate() const {
  if (!(hit_threshold >= 0.0 && hit_threshold <= 1.0)) {
    throw std::invalid_argument("HitParams: hit_threshold must be in [0,1]");
  }
}

void YawGrid::validate() const {
  if (!(step > 0.0)) throw std::invalid_argument("YawGrid: step must be positive");
  if (!(start >= 0.0)) throw std::invalid_argument("YawGrid: start must be >= 0");
  if (!(end >= start)) throw std::invalid_argument("YawGrid: end must be >= start");
  if (end > kYawPeriod + step + 1e-9) {
    throw std::invalid_argument("YawGrid: end may overshoot the symmetry period by at most one step");
  }
}

std::vector<double> YawGrid::values() const {
  validate();
  std::vector<double> out;
  for (int k = 0;; ++k) {
    const double v = start + k * step;
    if (v > end + 1e-9) break;
    out.push_back(v);
  }
  return out;
}

int edge_bit(const BinaryEdgeImage& img, int x, int y) {
  if (!img.in_bounds(x, y)) return 0;
  return img.at(x, y);
}

double neighborhood_score(const BinaryEdgeImage& img, int x, int y) {
  int sum = 0;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      sum += edge_bit(img, x + dx, y + dy);
    }
  }
  return sum / 9.0;
}

RankResult edge_ranking(const std::vector<Pixel>& points, const BinaryEdgeImage& img,
                        const HitParams& hp) {
  hp.validate();
  if (points.empty()) {
    throw NoScorablePoints("edge_ranking: no points to rank");
  }
  RankResult r;
  for (const auto& p : points) {
    if (neighborhood_score(img, p.u, p.v) >= hp.hit_threshold) {
      ++r.hits;
    } else {
      ++r.misses;
    }
  }
  r.ratio = static_cast<double>(r.hits) / static_cast<double>(r.hits + r.misses);
  return r;
}

PoseScore score_pose(const std::vector<ClassifiedEdgePoint>& model_points,
                     const BinaryEdgeImage& img, const HitParams& hp) {
  hp.validate();

  struct Tally {
    long hits = 0;
    long misses = 0;
  };
  Tally occl, bound, curv;

  for (const auto& p : model_points) {
    if (p.cls == EdgeClass::Occluded) continue;  // not visible in the photo
    Tally* t = nullptr;
    switch (p.cls) {
      case EdgeClass::Occluding:
        t = &occl;
        break;
      case EdgeClass::Boundary:
        t = &bound;
        break;
      case EdgeClass::HighCurvature:
        t = &curv;
        break;
      case EdgeClass::Occluded:
        break;
    }
    if (neighborhood_score(img, p.px.u, p.px.v) >= hp.hit_threshold) {
      ++t->hits;
    } else {
      ++t->misses;
    }
  }

  PoseScore s;
  auto finish = [](EdgeClass cls, const Tally& t) -> std::optional<TypeScore> {
    const long total = t.hits + t.misses;
    if (total == 0) return std::nullopt;
    return TypeScore{cls, t.hits, t.misses,
                     static_cast<double>(t.hits) / static_cast<double>(total)};
  };
  s.occluding = finish(EdgeClass::Occluding, occl);
  s.boundary = finish(EdgeClass::Boundary, bound);
  s.high_curvature = finish(EdgeClass::HighCurvature, curv);
  s.total_hits = occl.hits + bound.hits + curv.hits;
  s.total_points = occl.hits + occl.misses + bound.hits + bound.misses + curv.hits + curv.misses;
  if (s.total_points == 0) {
    throw NoScorablePoints("score_pose: every model point is occluded");
  }
  s.pooled = static_cast<double>(s.total_hits) / static_cast<double>(s.total_points);
  return s;
}

MatchReport sweep_yaw(int nut_id, const Point3& centroid, const EdgeModelSource& source,
                      const BinaryEdgeImage& img, const YawGrid& grid, const HitParams& hp) {
  const std::vector<double> yaws = grid.values();

  MatchReport report;
  report.nut_id = nut_id;
  report.centroid = centroid;

  bool have_best = false;
  for (double yaw : yaws) {
    PoseScore s;
    try {
      s = score_pose(source(yaw), img, hp);
    } catch (const NoScorablePoints&) {
      continue;
    }
    report.per_yaw.emplace_back(yaw, s.pooled);
    // Strict comparison in ascending yaw order keeps the smallest yaw on ties.
    if (!have_best || s.pooled > report.pooled_score) {
      have_best = true;
      report.pooled_score = s.pooled;
      report.best_yaw = yaw;
      report.occluding = s.occluding;
      report.boundary = s.boundary;
      report.high_curvature = s.high_curvature;
    }
  }
  if (!have_best) {
    throw NoScorablePoints("sweep_yaw: no yaw produced scorable points");
  }
  return report;
}

namespace {

ordered_json type_score_to_json(const std::optional<TypeScore>& ts) {
  if (!ts) return nullptr;
  ordered_json j;
  j["hits"] = ts->hits;
  j["misses"] = ts->misses;
  j["ratio"] = ts->ratio;
  return j;
}

std::optional<TypeScore> type_score_from_json(const ordered_json& j, EdgeClass cls) {
  if (j.is_null()) return std::nullopt;
  TypeScore ts;
  ts.edge_class = cls;
  ts.hits = j.at("hits").get<long>();
  ts.misses = j.at("misses").get<long>();
  ts.ratio = j.at("ratio").get<double>();
  return ts;
}

ordered_json report_to_json_obj(const MatchReport& r) {
  ordered_json j;
  j["nut_id"] = r.nut_id;
  j["centroid"] = {r.centroid.x, r.centroid.y, r.centroid.z};
  j["occluding"] = type_score_to_json(r.occluding);
  j["boundary"] = type_score_to_json(r.boundary);
  j["high_curvature"] = type_score_to_json(r.high_curvature);
  j["score"] = r.pooled_score;
  j["yaw"] = r.best_yaw;
  ordered_json per_yaw = ordered_json::array();
  for (const auto& [yaw, score] : r.per_yaw) {
    per_yaw.push_back(ordered_json::array({yaw, score}));
  }
  j["per_yaw"] = std::move(per_yaw);
  return j;
}

MatchReport report_from_json_obj(const ordered_json& j) {
  MatchReport r;
  r.nut_id = j.at("nut_id").get<int>();
  const auto& c = j.at("centroid");
  r.centroid = {c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>()};
  r.occluding = type_score_from_json(j.at("occluding"), EdgeClass::Occluding);
  r.boundary = type_score_from_json(j.at("boundary"), EdgeClass::Boundary);
  r.high_curvature = type_score_from_json(j.at("high_curvature"), EdgeClass::HighCurvature);
  r.pooled_score = j.at("score").get<double>();
  r.best_yaw = j.at("yaw").get<double>();
  for (const auto& e : j.at("per_yaw")) {
    r.per_yaw.emplace_back(e.at(0).get<double>(), e.at(1).get<double>());
  }
  return r;
}

}  // namespace

std::string report_to_json(const MatchReport& report) {
  return report_to_json_obj(report).dump(2);
}

std::string reports_to_json(const std::vector<MatchReport>& reports) {
  ordered_json arr = ordered_json::array();
  for (const auto& r : reports) arr.push_back(report_to_json_obj(r));
  return arr.dump(2);
}

MatchReport report_from_json(std::string_view text) {
  try {
    return report_from_json_obj(ordered_json::parse(text));
  } catch (const ordered_json::exception& e) {
    throw ParseError(std::string("report JSON: ") + e.what(), 0);
  }
}

std::vector<MatchReport> reports_from_json(std::string_view text) {
  try {
    const auto arr = ordered_json::parse(text);
    if (!arr.is_array()) throw ParseError("report JSON: expected an array", 0);
    std::vector<MatchReport> out;
    out.reserve(arr.size());
    for (const auto& j : arr) out.push_back(report_from_json_obj(j));
    return out;
  } catch (const ordered_json::exception& e) {
    throw ParseError(std::string("report JSON: ") + e.what(), 0);
  }
}

}  // namespace nutpose
