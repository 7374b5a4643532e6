#include "dfield/scene/camera.hpp"

#include <cmath>

#include "dfield/errors.hpp"

namespace dfield {

Camera::Camera(const Intrinsics& intrinsics, const Mat3& rotation, const Vec3& translation,
               int width, int height)
    : intrinsics_(intrinsics),
      rotation_(rotation),
      translation_(translation),
      width_(width),
      height_(height) {
  if (!is_rotation(rotation, 1e-6)) {
    throw ValidationError("camera rotation must be orthonormal with determinant +1");
  }
  if (width <= 0 || height <= 0) throw ValidationError("camera resolution must be positive");
  if (!(intrinsics.fx > 0) || !(intrinsics.fy > 0)) {
    throw ValidationError("camera focal lengths must be positive");
  }
}

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fov_y_deg,
                       int width, int height) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-9) throw ValidationError("look_at: up is parallel to the view axis");
  right.normalize();
  const Vec3 down = forward.cross(right);
  Mat3 r;
  r.row(0) = right.transpose();
  r.row(1) = down.transpose();
  r.row(2) = forward.transpose();
  const double f = 0.5 * height / std::tan(0.5 * fov_y_deg * M_PI / 180.0);
  Intrinsics k{f, f, 0.5 * width, 0.5 * height};
  return Camera(k, r, -r * eye, width, height);
}

std::optional<Vec2> Camera::project(const Vec3& world) const {
  const Vec3 p = to_camera(world);
  if (p.z() <= 0.0) return std::nullopt;
  return Vec2(intrinsics_.fx * p.x() / p.z() + intrinsics_.cx,
              intrinsics_.fy * p.y() / p.z() + intrinsics_.cy);
}

Vec3 Camera::unproject(const Vec2& pixel, double depth) const {
  const Vec3 p((pixel.x() - intrinsics_.cx) / intrinsics_.fx * depth,
               (pixel.y() - intrinsics_.cy) / intrinsics_.fy * depth, depth);
  return rotation_.transpose() * (p - translation_);
}

Vec3 Camera::direction(const Vec2& pixel) const {
  const Vec3 d((pixel.x() - intrinsics_.cx) / intrinsics_.fx,
               (pixel.y() - intrinsics_.cy) / intrinsics_.fy, 1.0);
  return (rotation_.transpose() * d).normalized();
}

}  // namespace dfield
