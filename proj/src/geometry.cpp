#include "nutpose/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace nutpose {

Mat3 Mat3::rotation_z(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Mat3 r;
  r.m[0][0] = c;
  r.m[0][1] = -s;
  r.m[0][2] = 0.0;
  r.m[1][0] = s;
  r.m[1][1] = c;
  r.m[1][2] = 0.0;
  r.m[2][0] = 0.0;
  r.m[2][1] = 0.0;
  r.m[2][2] = 1.0;
  return r;
}

Mat3 Mat3::transpose() const {
  Mat3 t;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) t.m[i][j] = m[j][i];
  return t;
}

double Mat3::determinant() const {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
         m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

Mat3 Mat3::operator*(const Mat3& o) const {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      r.m[i][j] = m[i][0] * o.m[0][j] + m[i][1] * o.m[1][j] + m[i][2] * o.m[2][j];
    }
  return r;
}

double wrap_yaw(double yaw) {
  if (!std::isfinite(yaw)) {
    throw std::invalid_argument("wrap_yaw: yaw must be finite");
  }
  double r = std::fmod(yaw, kYawPeriod);
  if (r < 0.0) r += kYawPeriod;
  // The addition above can round up to exactly one period.
  if (r >= kYawPeriod) r = 0.0;
  return r;
}

Point3 apply_pose(const Pose& pose, const Point3& p) {
  if (!finite(pose.position) || !std::isfinite(pose.yaw)) {
    throw std::invalid_argument("apply_pose: pose must be finite");
  }
  const double c = std::cos(pose.yaw);
  const double s = std::sin(pose.yaw);
  return {c * p.x - s * p.y + pose.position.x,
          s * p.x + c * p.y + pose.position.y,
          p.z + pose.position.z};
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw std::invalid_argument("CameraIntrinsics: focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("CameraIntrinsics: image dimensions must be positive");
  }
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw std::invalid_argument("CameraIntrinsics: principal point outside image");
  }
}

CameraExtrinsics CameraExtrinsics::look_at(const Point3& eye, const Point3& target) {
  const Vec3 forward = normalized(target - eye);
  const Vec3 world_up{0.0, 0.0, 1.0};
  Vec3 right = cross(forward, world_up);
  const double rn = norm(right);
  if (rn < 1e-12) {
    // Looking straight up/down; pick an arbitrary right axis.
    right = {0.0, -1.0, 0.0};
  } else {
    right = right * (1.0 / rn);
  }
  const Vec3 down = cross(forward, right);  // +y is down in the camera frame

  CameraExtrinsics e;
  e.rotation.m[0][0] = right.x;
  e.rotation.m[0][1] = right.y;
  e.rotation.m[0][2] = right.z;
  e.rotation.m[1][0] = down.x;
  e.rotation.m[1][1] = down.y;
  e.rotation.m[1][2] = down.z;
  e.rotation.m[2][0] = forward.x;
  e.rotation.m[2][1] = forward.y;
  e.rotation.m[2][2] = forward.z;
  e.translation = (e.rotation * eye) * -1.0;
  return e;
}

Point3 CameraExtrinsics::camera_position() const {
  return (rotation.transpose() * translation) * -1.0;
}

void CameraExtrinsics::validate() const {
  const Mat3 rtr = rotation.transpose() * rotation;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double expect = (i == j) ? 1.0 : 0.0;
      if (std::abs(rtr.m[i][j] - expect) > 1e-9) {
        throw std::invalid_argument("CameraExtrinsics: rotation not orthonormal");
      }
    }
  if (std::abs(rotation.determinant() - 1.0) > 1e-9) {
    throw std::invalid_argument("CameraExtrinsics: rotation determinant != +1");
  }
  if (!finite(translation)) {
    throw std::invalid_argument("CameraExtrinsics: translation not finite");
  }
}

std::optional<ContinuousProjection> project_continuous(
    const Point3& p_world, const CameraIntrinsics& intr,
    const CameraExtrinsics& extr) {
  const Point3 cam = extr.to_camera(p_world);
  if (cam.z <= kMinCameraDepth) return std::nullopt;
  return ContinuousProjection{intr.fx * cam.x / cam.z + intr.cx,
                              intr.fy * cam.y / cam.z + intr.cy, cam.z};
}

std::optional<ProjectedPoint> project(const Point3& p_world,
                                      const CameraIntrinsics& intr,
                                      const CameraExtrinsics& extr) {
  const auto c = project_continuous(p_world, intr, extr);
  if (!c) return std::nullopt;
  return ProjectedPoint{
      Pixel{static_cast<int>(std::lround(c->u)), static_cast<int>(std::lround(c->v))},
      c->depth};
}

}  // namespace nutpose
