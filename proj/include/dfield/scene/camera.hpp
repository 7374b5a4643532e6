#pragma once

#include <optional>

#include "dfield/scene/geometry.hpp"

namespace dfield {

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
};

// Pinhole camera, OpenCV convention: x_cam = R x_world + t, the camera looks
// down +z, image x to the right and y down. Continuous pixel coordinates put
// the center of pixel (i, j) at (i + 0.5, j + 0.5).
class Camera {
 public:
  Camera() = default;
  // Throws ValidationError when R is not a proper rotation (tolerance 1e-6)
  // or the resolution is not positive.
  Camera(const Intrinsics& intrinsics, const Mat3& rotation, const Vec3& translation, int width,
         int height);

  // Camera at `eye` looking at `target`; `up` fixes the roll (image y points
  // away from it). `fov_y_deg` is the full vertical field of view.
  static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fov_y_deg,
                        int width, int height);

  const Intrinsics& intrinsics() const { return intrinsics_; }
  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }
  int width() const { return width_; }
  int height() const { return height_; }
  Vec3 center() const { return -rotation_.transpose() * translation_; }

  Vec3 to_camera(const Vec3& world) const { return rotation_ * world + translation_; }
  // Continuous pixel coordinates; nullopt for depth <= 0.
  std::optional<Vec2> project(const Vec3& world) const;
  // World point at camera-space depth z along the pixel's ray.
  Vec3 unproject(const Vec2& pixel, double depth) const;
  // Unit world direction through continuous pixel coordinates.
  Vec3 direction(const Vec2& pixel) const;
  Vec2 pixel_center(int i, int j) const { return Vec2(i + 0.5, j + 0.5); }

 private:
  Intrinsics intrinsics_;
  Mat3 rotation_ = Mat3::Identity();
  Vec3 translation_ = Vec3::Zero();
  int width_ = 1;
  int height_ = 1;
};

}  // namespace dfield
