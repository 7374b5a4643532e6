#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dfield/scene/camera.hpp"
#include "dfield/scene/geometry.hpp"
#include "dfield/scene/image.hpp"

namespace dfield {

enum class PrimitiveKind { Sphere, Box, Capsule };
enum class TextureKind { Constant, Checker, Gradient };

// Procedural albedo evaluated in the primitive's local frame.
struct Texture {
  TextureKind kind = TextureKind::Constant;
  Vec3 color_a = Vec3(0.8, 0.8, 0.8);
  Vec3 color_b = Vec3(0.2, 0.2, 0.2);
  double frequency = 2.0;  // checker cells per scene unit
  int axis = 2;            // gradient axis
  Vec3 eval(const Vec3& local, double extent) const;
};

struct Primitive {
  PrimitiveKind kind = PrimitiveKind::Sphere;
  Vec3 center = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();  // local -> world
  double radius = 1.0;                // sphere, capsule
  Vec3 half_extents = Vec3::Ones();   // box
  double half_length = 0.5;           // capsule segment along local z
  Texture texture;

  Vec3 to_local(const Vec3& world) const { return rotation.transpose() * (world - center); }
  double sdf(const Vec3& world) const;
  // Outward unit normal of this primitive's surface nearest to `world`.
  Vec3 normal(const Vec3& world) const;
  // First hit distance t > t_min of origin + t dir (unit dir).
  std::optional<double> intersect(const Vec3& origin, const Vec3& dir, double t_min) const;
  Aabb bounds() const;
  double bounding_radius() const;
  double surface_area() const;
  Vec3 sample_surface(std::mt19937_64& rng) const;
  Vec3 albedo(const Vec3& world) const;
};

// Description of a scene before validation. With `random_primitives` > 0 the
// primitive list is drawn from `seed` instead of `primitives`.
struct SceneSpec {
  std::string id = "scene";
  std::uint64_t seed = 0;
  std::vector<Primitive> primitives;
  int random_primitives = 0;
  std::optional<Aabb> bounds;
};

struct Hit {
  double t = 0.0;
  int primitive = -1;
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::Zero();
  Vec3 color = Vec3::Zero();
};

// Points sampled exactly on the boundary of the union of solids.
struct SurfaceSamples {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;  // outward
};

class Scene {
 public:
  Scene() = default;
  Scene(std::string id, std::vector<Primitive> primitives, const Aabb& bounds);

  const std::string& id() const { return id_; }
  const std::vector<Primitive>& primitives() const { return primitives_; }
  const Aabb& bounds() const { return bounds_; }

  // 1 inside the union (boundary inclusive), 0 outside.
  int occupancy(const Vec3& x) const;
  // min over primitives of the signed distance; exact outside the union.
  double sdf(const Vec3& x) const;
  // Throws DomainError when x is farther than 1e-6 from the union boundary.
  Vec3 normal(const Vec3& x) const;
  std::optional<Hit> first_hit(const Vec3& origin, const Vec3& dir, double t_min = 1e-9) const;
  SurfaceSamples sample_surface(std::size_t count, std::mt19937_64& rng) const;
  // Center and radius of a sphere enclosing every solid.
  double bounding_radius_about(const Vec3& center) const;

 private:
  std::string id_;
  std::vector<Primitive> primitives_;
  Aabb bounds_;
};

// Deterministic for a given spec. Throws ValidationError for 0 or more than 4
// primitives, degenerate sizes, or solids not strictly inside explicit bounds.
Scene make_scene(const SceneSpec& spec);

struct GroundTruthRender {
  Image image;
  Mask mask;
  std::vector<double> depth;  // hit distance along the unit ray; 0 for misses
};

GroundTruthRender render_ground_truth(const Scene& scene, const Camera& camera,
                                      const Vec3& background = Vec3::Zero());

}  // namespace dfield
