#include "dfield/scene/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dfield/errors.hpp"

namespace dfield {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Roots of t^2 + 2 b t + c = 0 in ascending order.
std::optional<Vec2> solve_quadratic(double b, double c) {
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double s = std::sqrt(disc);
  // Stable form: avoid cancellation in the root nearer zero.
  const double q = b > 0.0 ? -(b + s) : -(b - s);
  double t0 = q;
  double t1 = q != 0.0 ? c / q : 0.0;
  if (t0 > t1) std::swap(t0, t1);
  return Vec2(t0, t1);
}

Vec3 uniform_sphere(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  for (;;) {
    Vec3 v(n(rng), n(rng), n(rng));
    const double len = v.norm();
    if (len > 1e-12) return v / len;
  }
}

double segment_distance_sq(const Vec3& p, double half_length) {
  const double z = std::clamp(p.z(), -half_length, half_length);
  const Vec3 d(p.x(), p.y(), p.z() - z);
  return d.squaredNorm();
}

}  // namespace

Vec3 Texture::eval(const Vec3& local, double extent) const {
  switch (kind) {
    case TextureKind::Constant:
      return color_a;
    case TextureKind::Checker: {
      const long parity = static_cast<long>(std::floor(frequency * local.x())) +
                          static_cast<long>(std::floor(frequency * local.y())) +
                          static_cast<long>(std::floor(frequency * local.z()));
      return (parity & 1) ? color_b : color_a;
    }
    case TextureKind::Gradient: {
      const double e = extent > 0.0 ? extent : 1.0;
      const double u = std::clamp(0.5 * (local[axis] / e + 1.0), 0.0, 1.0);
      return (1.0 - u) * color_a + u * color_b;
    }
  }
  return color_a;
}

double Primitive::sdf(const Vec3& world) const {
  const Vec3 p = to_local(world);
  switch (kind) {
    case PrimitiveKind::Sphere:
      return p.norm() - radius;
    case PrimitiveKind::Box: {
      const Vec3 q = p.cwiseAbs() - half_extents;
      return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
    }
    case PrimitiveKind::Capsule:
      return std::sqrt(segment_distance_sq(p, half_length)) - radius;
  }
  return kInf;
}

Vec3 Primitive::normal(const Vec3& world) const {
  const Vec3 p = to_local(world);
  Vec3 n = Vec3::UnitZ();
  switch (kind) {
    case PrimitiveKind::Sphere:
      if (p.norm() > 0.0) n = p.normalized();
      break;
    case PrimitiveKind::Box: {
      const Vec3 q = p.cwiseAbs() - half_extents;
      if (q.maxCoeff() > 0.0) {
        Vec3 g = q.cwiseMax(0.0);
        for (int a = 0; a < 3; ++a) g[a] = std::copysign(g[a], p[a]);
        n = g.normalized();
      } else {
        int axis = 0;
        q.maxCoeff(&axis);
        n = Vec3::Zero();
        n[axis] = p[axis] >= 0.0 ? 1.0 : -1.0;
      }
      break;
    }
    case PrimitiveKind::Capsule: {
      const double z = std::clamp(p.z(), -half_length, half_length);
      const Vec3 d(p.x(), p.y(), p.z() - z);
      if (d.norm() > 0.0) n = d.normalized();
      break;
    }
  }
  return rotation * n;
}

std::optional<double> Primitive::intersect(const Vec3& origin, const Vec3& dir,
                                           double t_min) const {
  const Vec3 o = to_local(origin);
  const Vec3 d = rotation.transpose() * dir;
  double best = kInf;
  auto consider = [&](double t) {
    if (t > t_min && t < best) best = t;
  };
  switch (kind) {
    case PrimitiveKind::Sphere: {
      if (auto r = solve_quadratic(o.dot(d) / d.squaredNorm(),
                                   (o.squaredNorm() - radius * radius) / d.squaredNorm())) {
        consider((*r)[0]);
        consider((*r)[1]);
      }
      break;
    }
    case PrimitiveKind::Box: {
      Aabb box{-half_extents, half_extents};
      if (auto r = box.ray_interval(o, d)) {
        consider((*r)[0]);
        consider((*r)[1]);
      }
      break;
    }
    case PrimitiveKind::Capsule: {
      const double a = d.x() * d.x() + d.y() * d.y();
      if (a > 1e-15) {
        if (auto r = solve_quadratic((o.x() * d.x() + o.y() * d.y()) / a,
                                     (o.x() * o.x() + o.y() * o.y() - radius * radius) / a)) {
          for (int k = 0; k < 2; ++k) {
            const double z = o.z() + (*r)[k] * d.z();
            if (z >= -half_length && z <= half_length) consider((*r)[k]);
          }
        }
      }
      for (double zc : {-half_length, half_length}) {
        const Vec3 oc = o - Vec3(0, 0, zc);
        const double dd = d.squaredNorm();
        if (auto r = solve_quadratic(oc.dot(d) / dd, (oc.squaredNorm() - radius * radius) / dd)) {
          for (int k = 0; k < 2; ++k) {
            const double z = o.z() + (*r)[k] * d.z();
            if ((zc > 0.0 && z >= zc) || (zc < 0.0 && z <= zc) || (zc == 0.0)) consider((*r)[k]);
          }
        }
      }
      break;
    }
  }
  if (best == kInf) return std::nullopt;
  return best;
}

Aabb Primitive::bounds() const {
  Vec3 h;
  switch (kind) {
    case PrimitiveKind::Sphere:
      h = Vec3::Constant(radius);
      break;
    case PrimitiveKind::Box:
      h = rotation.cwiseAbs() * half_extents;
      break;
    case PrimitiveKind::Capsule:
      h = rotation.col(2).cwiseAbs() * half_length + Vec3::Constant(radius);
      break;
  }
  return Aabb{center - h, center + h};
}

double Primitive::bounding_radius() const {
  switch (kind) {
    case PrimitiveKind::Sphere:
      return radius;
    case PrimitiveKind::Box:
      return half_extents.norm();
    case PrimitiveKind::Capsule:
      return half_length + radius;
  }
  return 0.0;
}

double Primitive::surface_area() const {
  switch (kind) {
    case PrimitiveKind::Sphere:
      return 4.0 * M_PI * radius * radius;
    case PrimitiveKind::Box: {
      const Vec3 e = 2.0 * half_extents;
      return 2.0 * (e.x() * e.y() + e.y() * e.z() + e.x() * e.z());
    }
    case PrimitiveKind::Capsule:
      return 4.0 * M_PI * radius * radius + 2.0 * M_PI * radius * 2.0 * half_length;
  }
  return 0.0;
}

Vec3 Primitive::sample_surface(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec3 p;
  switch (kind) {
    case PrimitiveKind::Sphere:
      p = radius * uniform_sphere(rng);
      break;
    case PrimitiveKind::Box: {
      const Vec3& h = half_extents;
      const double areas[3] = {h.y() * h.z(), h.x() * h.z(), h.x() * h.y()};
      double r = u(rng) * (areas[0] + areas[1] + areas[2]);
      int axis = 0;
      while (axis < 2 && r > areas[axis]) r -= areas[axis++];
      for (int a = 0; a < 3; ++a) p[a] = (2.0 * u(rng) - 1.0) * h[a];
      p[axis] = u(rng) < 0.5 ? -h[axis] : h[axis];
      break;
    }
    case PrimitiveKind::Capsule: {
      const double cap = 4.0 * M_PI * radius * radius;
      const double side = 4.0 * M_PI * radius * half_length;
      if (u(rng) * (cap + side) < cap) {
        p = radius * uniform_sphere(rng);
        p.z() += p.z() >= 0.0 ? half_length : -half_length;
      } else {
        const double phi = 2.0 * M_PI * u(rng);
        p = Vec3(radius * std::cos(phi), radius * std::sin(phi), (2.0 * u(rng) - 1.0) * half_length);
      }
      break;
    }
  }
  return rotation * p + center;
}

Vec3 Primitive::albedo(const Vec3& world) const {
  const Vec3 p = to_local(world);
  double extent = radius;
  if (kind == PrimitiveKind::Box) extent = half_extents[texture.axis];
  if (kind == PrimitiveKind::Capsule && texture.axis == 2) extent = half_length + radius;
  return texture.eval(p, extent);
}

Scene::Scene(std::string id, std::vector<Primitive> primitives, const Aabb& bounds)
    : id_(std::move(id)), primitives_(std::move(primitives)), bounds_(bounds) {}

int Scene::occupancy(const Vec3& x) const {
  for (const auto& prim : primitives_) {
    const Vec3 p = prim.to_local(x);
    bool inside = false;
    switch (prim.kind) {
      case PrimitiveKind::Sphere:
        inside = p.squaredNorm() <= prim.radius * prim.radius;
        break;
      case PrimitiveKind::Box:
        inside = (p.cwiseAbs().array() <= prim.half_extents.array()).all();
        break;
      case PrimitiveKind::Capsule:
        inside = segment_distance_sq(p, prim.half_length) <= prim.radius * prim.radius;
        break;
    }
    if (inside) return 1;
  }
  return 0;
}

double Scene::sdf(const Vec3& x) const {
  double d = kInf;
  for (const auto& prim : primitives_) d = std::min(d, prim.sdf(x));
  return d;
}

Vec3 Scene::normal(const Vec3& x) const {
  constexpr double tol = 1e-6;
  double min_sdf = kInf;
  double nearest = kInf;
  int idx = -1;
  for (std::size_t i = 0; i < primitives_.size(); ++i) {
    const double d = primitives_[i].sdf(x);
    min_sdf = std::min(min_sdf, d);
    if (std::abs(d) < nearest) {
      nearest = std::abs(d);
      idx = static_cast<int>(i);
    }
  }
  if (idx < 0 || nearest > tol || min_sdf < -tol) {
    throw DomainError("normal requested at a point that is not on the surface");
  }
  return primitives_[idx].normal(x).normalized();
}

std::optional<Hit> Scene::first_hit(const Vec3& origin, const Vec3& dir, double t_min) const {
  Hit hit;
  hit.t = kInf;
  for (std::size_t i = 0; i < primitives_.size(); ++i) {
    if (auto t = primitives_[i].intersect(origin, dir, t_min); t && *t < hit.t) {
      hit.t = *t;
      hit.primitive = static_cast<int>(i);
    }
  }
  if (hit.primitive < 0) return std::nullopt;
  const auto& prim = primitives_[hit.primitive];
  hit.point = origin + hit.t * dir;
  hit.normal = prim.normal(hit.point);
  if (hit.normal.dot(dir) > 0.0) hit.normal = -hit.normal;
  hit.color = prim.albedo(hit.point);
  return hit;
}

SurfaceSamples Scene::sample_surface(std::size_t count, std::mt19937_64& rng) const {
  SurfaceSamples out;
  out.points.reserve(count);
  out.normals.reserve(count);
  std::vector<double> areas;
  for (const auto& p : primitives_) areas.push_back(p.surface_area());
  std::discrete_distribution<int> pick(areas.begin(), areas.end());
  std::size_t attempts = 0;
  while (out.points.size() < count) {
    if (++attempts > 1000 * (count + 10)) {
      throw ValidationError("scene surface is fully occluded; cannot sample it");
    }
    const int k = pick(rng);
    const Vec3 x = primitives_[k].sample_surface(rng);
    bool buried = false;
    for (std::size_t j = 0; j < primitives_.size() && !buried; ++j) {
      if (static_cast<int>(j) != k && primitives_[j].sdf(x) < 0.0) buried = true;
    }
    if (buried) continue;
    out.points.push_back(x);
    out.normals.push_back(primitives_[k].normal(x).normalized());
  }
  return out;
}

double Scene::bounding_radius_about(const Vec3& c) const {
  double r = 0.0;
  for (const auto& p : primitives_) r = std::max(r, (p.center - c).norm() + p.bounding_radius());
  return r;
}

namespace {

std::vector<Primitive> random_primitives(int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto range = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  auto color = [&]() { return Vec3(range(0.1, 0.9), range(0.1, 0.9), range(0.1, 0.9)); };
  std::vector<Primitive> out;
  for (int i = 0; i < count; ++i) {
    Primitive p;
    p.kind = static_cast<PrimitiveKind>(static_cast<int>(u(rng) * 3.0) % 3);
    p.center = Vec3(range(-0.5, 0.5), range(-0.5, 0.5), range(-0.5, 0.5));
    p.rotation = rotation_from_euler_deg(Vec3(range(0, 90), range(0, 90), range(0, 90)));
    p.radius = range(0.25, 0.6);
    p.half_extents = Vec3(range(0.2, 0.5), range(0.2, 0.5), range(0.2, 0.5));
    p.half_length = range(0.2, 0.5);
    p.texture.kind = static_cast<TextureKind>(static_cast<int>(u(rng) * 3.0) % 3);
    p.texture.color_a = color();
    p.texture.color_b = color();
    p.texture.frequency = range(1.0, 4.0);
    p.texture.axis = static_cast<int>(u(rng) * 3.0) % 3;
    out.push_back(p);
  }
  return out;
}

void validate_primitive(const Primitive& p, std::size_t i) {
  const std::string where = "primitive " + std::to_string(i) + ": ";
  if (!p.center.allFinite()) throw ValidationError(where + "center must be finite");
  if (!is_rotation(p.rotation, 1e-6)) throw ValidationError(where + "pose is not a rotation");
  switch (p.kind) {
    case PrimitiveKind::Sphere:
      if (!(p.radius > 0.0 && std::isfinite(p.radius)))
        throw ValidationError(where + "radius must be positive");
      break;
    case PrimitiveKind::Box:
      if (!((p.half_extents.array() > 0.0).all() && p.half_extents.allFinite()))
        throw ValidationError(where + "box sizes must be positive");
      break;
    case PrimitiveKind::Capsule:
      if (!(p.radius > 0.0 && p.half_length >= 0.0 && std::isfinite(p.radius) &&
            std::isfinite(p.half_length)))
        throw ValidationError(where + "capsule radius must be positive, length non-negative");
      break;
  }
  const auto& t = p.texture;
  if (!t.color_a.allFinite() || !t.color_b.allFinite() || (t.color_a.array() < 0.0).any() ||
      (t.color_a.array() > 1.0).any() || (t.color_b.array() < 0.0).any() ||
      (t.color_b.array() > 1.0).any())
    throw ValidationError(where + "texture colors must lie in [0, 1]");
  if (t.axis < 0 || t.axis > 2) throw ValidationError(where + "texture axis must be 0, 1 or 2");
  if (!(t.frequency > 0.0)) throw ValidationError(where + "checker frequency must be positive");
}

}  // namespace

Scene make_scene(const SceneSpec& spec) {
  std::vector<Primitive> prims = spec.primitives;
  if (spec.random_primitives > 0) {
    if (!prims.empty()) throw ValidationError("give either primitives or random_primitives, not both");
    if (spec.random_primitives > 4) throw ValidationError("at most 4 primitives are supported");
    prims = random_primitives(spec.random_primitives, spec.seed);
  }
  if (prims.empty() || prims.size() > 4) {
    throw ValidationError("a scene needs between 1 and 4 primitives");
  }
  for (std::size_t i = 0; i < prims.size(); ++i) validate_primitive(prims[i], i);

  Aabb tight = prims.front().bounds();
  for (const auto& p : prims) tight.extend(p.bounds());

  Aabb bounds;
  if (spec.bounds) {
    bounds = *spec.bounds;
    for (std::size_t i = 0; i < prims.size(); ++i) {
      if (!bounds.strictly_contains(prims[i].bounds())) {
        throw ValidationError("rejected scene spec: primitive " + std::to_string(i) +
                              " is not strictly inside the declared bounds");
      }
    }
  } else {
    const Vec3 pad = 0.1 * tight.half_extent();
    bounds = Aabb{tight.lo - pad, tight.hi + pad};
  }
  return Scene(spec.id, std::move(prims), bounds);
}

GroundTruthRender render_ground_truth(const Scene& scene, const Camera& camera,
                                      const Vec3& background) {
  const int w = camera.width();
  const int h = camera.height();
  GroundTruthRender out{Image(w, h, 3), Mask(w, h),
                        std::vector<double>(static_cast<std::size_t>(w) * h, 0.0)};
  const Vec3 origin = camera.center();
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Vec3 dir = camera.direction(camera.pixel_center(x, y));
      if (auto hit = scene.first_hit(origin, dir, 0.0)) {
        out.image.set_rgb(x, y, hit->color);
        out.mask.set(x, y, true);
        out.depth[static_cast<std::size_t>(y) * w + x] = hit->t;
      } else {
        out.image.set_rgb(x, y, background);
      }
    }
  }
  return out;
}

}  // namespace dfield
