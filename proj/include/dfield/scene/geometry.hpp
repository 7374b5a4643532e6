#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <optional>

namespace dfield {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct Aabb {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  Vec3 center() const { return 0.5 * (lo + hi); }
  Vec3 half_extent() const { return 0.5 * (hi - lo); }
  double diagonal() const { return (hi - lo).norm(); }
  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
  bool strictly_contains(const Aabb& other) const {
    return (other.lo.array() > lo.array()).all() && (other.hi.array() < hi.array()).all();
  }
  void extend(const Aabb& other) {
    lo = lo.cwiseMin(other.lo);
    hi = hi.cwiseMax(other.hi);
  }
  // Entry/exit distances of o + t d, or nullopt when the line misses.
  std::optional<Vec2> ray_interval(const Vec3& origin, const Vec3& dir) const;
};

// Rotation from XYZ Euler angles in degrees (applied X, then Y, then Z).
Mat3 rotation_from_euler_deg(const Vec3& degrees);

bool is_rotation(const Mat3& r, double tol = 1e-6);

}  // namespace dfield
