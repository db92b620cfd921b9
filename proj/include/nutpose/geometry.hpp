#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>

namespace nutpose {

/// 3-D point / vector, meters. Whether coordinates are in the world or the
/// camera frame is documented per call site.
struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Point3 operator+(const Point3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Point3 operator-(const Point3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Point3 operator*(double s) const { return {x * s, y * s, z * s}; }
  bool operator==(const Point3& o) const = default;
};

using Vec3 = Point3;

inline double dot(const Vec3& a, const Vec3& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

inline Vec3 normalized(const Vec3& v) {
  const double n = norm(v);
  return {v.x / n, v.y / n, v.z / n};
}

inline double distance(const Point3& a, const Point3& b) { return norm(a - b); }

inline bool finite(const Point3& p) {
  return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z);
}

/// Row-major 3x3 matrix.
struct Mat3 {
  double m[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};

  static Mat3 identity() { return {}; }
  static Mat3 rotation_z(double angle);

  Vec3 row(int i) const { return {m[i][0], m[i][1], m[i][2]}; }
  Mat3 transpose() const;
  double determinant() const;

  Vec3 operator*(const Vec3& v) const {
    return {dot(row(0), v), dot(row(1), v), dot(row(2), v)};
  }
  Mat3 operator*(const Mat3& o) const;
};

/// A hex nut looks the same after a 60 degree turn, so yaw estimation only
/// ever needs the interval [0, pi/3).
inline constexpr double kYawPeriod = std::numbers::pi / 3.0;

/// Reduces yaw to its canonical representative in [0, kYawPeriod).
/// Throws std::invalid_argument for non-finite input.
double wrap_yaw(double yaw);

/// Object placement: position in the world frame plus a yaw about world z.
struct Pose {
  Point3 position;
  double yaw = 0.0;
};

/// Rotates a model-frame point by pose.yaw about z, then translates by
/// pose.position. Returns the world-frame point.
Point3 apply_pose(const Pose& pose, const Point3& p);

struct CameraIntrinsics {
  double fx = 0.0;  // pixels
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  /// Throws std::invalid_argument when fx/fy are not positive or the
  /// principal point lies outside the image.
  void validate() const;
};

/// World-to-camera rigid transform: p_cam = rotation * p_world + translation.
/// Camera frame is the usual computer-vision one: +x right, +y down,
/// +z forward (into the scene).
struct CameraExtrinsics {
  Mat3 rotation;
  Point3 translation;

  /// Builds extrinsics for a camera at `eye` looking at `target`
  /// (world z is up).
  static CameraExtrinsics look_at(const Point3& eye, const Point3& target);

  Point3 to_camera(const Point3& p_world) const {
    return rotation * p_world + translation;
  }

  /// Camera center in world coordinates.
  Point3 camera_position() const;

  /// Throws std::invalid_argument unless rotation is orthonormal with
  /// determinant +1 (checked to 1e-9).
  void validate() const;
};

/// Integer pixel coordinates (column u, row v). May lie outside image
/// bounds; bounds checks happen at use sites.
struct Pixel {
  int u = 0;
  int v = 0;
  bool operator==(const Pixel& o) const = default;
};

struct ProjectedPoint {
  Pixel px;
  double depth = 0.0;  // camera-frame z, meters
};

/// Continuous (sub-pixel) projection, used by the rasterizer.
struct ContinuousProjection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
};

inline constexpr double kMinCameraDepth = 1e-9;

/// Pinhole projection with round-half-away-from-zero pixel rounding,
/// applied exactly once here; everything downstream works on integer
/// pixels. Returns nullopt when the point is at or behind the camera
/// (camera-frame z <= 1e-9).
std::optional<ProjectedPoint> project(const Point3& p_world,
                                      const CameraIntrinsics& intr,
                                      const CameraExtrinsics& extr);

/// Same projection without pixel rounding.
std::optional<ContinuousProjection> project_continuous(
    const Point3& p_world, const CameraIntrinsics& intr,
    const CameraExtrinsics& extr);

}  // namespace nutpose
