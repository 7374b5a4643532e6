#include <doctest.h>

#include <cmath>
#include <random>

#include "dfield/errors.hpp"
#include "dfield/scene/dataset.hpp"
#include "dfield/scene/scene.hpp"

using namespace dfield;

namespace {

Primitive sphere(double r, Vec3 c = Vec3::Zero()) {
  Primitive p;
  p.kind = PrimitiveKind::Sphere;
  p.radius = r;
  p.center = c;
  return p;
}

Primitive box(Vec3 half, Vec3 c = Vec3::Zero()) {
  Primitive p;
  p.kind = PrimitiveKind::Box;
  p.half_extents = half;
  p.center = c;
  return p;
}

Scene unit_sphere() { return make_scene(SceneSpec{"s", 0, {sphere(1.0)}, 0, std::nullopt}); }

Scene sphere_and_box() {
  Primitive s = sphere(1.0);
  s.texture.kind = TextureKind::Checker;
  return make_scene(SceneSpec{"sb", 0, {s, box(Vec3::Constant(0.25), Vec3(0, 0, 1.2))}, 0,
                              std::nullopt});
}

bool same_scene(const Scene& a, const Scene& b) {
  if (a.primitives().size() != b.primitives().size()) return false;
  if (a.bounds().lo != b.bounds().lo || a.bounds().hi != b.bounds().hi) return false;
  for (std::size_t i = 0; i < a.primitives().size(); ++i) {
    const auto& p = a.primitives()[i];
    const auto& q = b.primitives()[i];
    if (p.kind != q.kind || p.center != q.center || p.rotation != q.rotation ||
        p.radius != q.radius || p.half_extents != q.half_extents ||
        p.half_length != q.half_length || p.texture.color_a != q.texture.color_a)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("make_scene bounds and validation") {
  const Scene s = unit_sphere();
  CHECK(s.bounds().lo.isApprox(Vec3::Constant(-1.1)));
  CHECK(s.bounds().hi.isApprox(Vec3::Constant(1.1)));
  CHECK(same_scene(s, unit_sphere()));

  SceneSpec random{"r", 42, {}, 3, std::nullopt};
  CHECK(same_scene(make_scene(random), make_scene(random)));
  random.seed = 43;
  CHECK_FALSE(same_scene(make_scene(SceneSpec{"r", 42, {}, 3, std::nullopt}), make_scene(random)));

  CHECK_THROWS_AS(make_scene(SceneSpec{"e", 0, {}, 0, std::nullopt}), ValidationError);
  std::vector<Primitive> five(5, sphere(0.1));
  CHECK_THROWS_AS(make_scene(SceneSpec{"f", 0, five, 0, std::nullopt}), ValidationError);
  CHECK_THROWS_AS(make_scene(SceneSpec{"neg", 0, {sphere(-1.0)}, 0, std::nullopt}), ValidationError);
  // A solid poking out of declared bounds is rejected.
  CHECK_THROWS_AS(make_scene(SceneSpec{"b", 0, {sphere(1.0)}, 0, Aabb{Vec3::Constant(-1), Vec3::Constant(1)}}),
                  ValidationError);
  CHECK_NOTHROW(make_scene(SceneSpec{"b", 0, {sphere(1.0)}, 0, Aabb{Vec3::Constant(-2), Vec3::Constant(2)}}));
}

TEST_CASE("occupancy oracle") {
  const Scene s = unit_sphere();
  CHECK(s.occupancy(Vec3(0, 0, 0)) == 1);
  CHECK(s.occupancy(Vec3(0, 0, 2)) == 0);
  CHECK(0.6 * 0.6 + 0.8 * 0.8 == 1.0);
  CHECK(s.occupancy(Vec3(0.6, 0, 0.8)) == 1);
  CHECK(s.occupancy(Vec3(0.6, 0, 0.8000001)) == 0);

  const Scene sb = sphere_and_box();
  CHECK(sb.occupancy(Vec3(0, 0, 1.2)) == 1);
  CHECK(sb.occupancy(Vec3(0, 0, 2.5)) == 0);
  CHECK(sb.occupancy(Vec3(0.25, 0.25, 1.45)) == 1);  // box corner counts as inside

  Primitive cap;
  cap.kind = PrimitiveKind::Capsule;
  cap.radius = 0.5;
  cap.half_length = 1.0;
  cap.rotation = rotation_from_euler_deg(Vec3(0, 90, 0));  // axis along world x
  const Scene c = make_scene(SceneSpec{"c", 0, {cap}, 0, std::nullopt});
  CHECK(c.occupancy(Vec3(1.4, 0, 0)) == 1);
  CHECK(c.occupancy(Vec3(1.6, 0, 0)) == 0);
  CHECK(c.occupancy(Vec3(0, 0, 0.49)) == 1);
  CHECK(c.occupancy(Vec3(0, 0, 0.51)) == 0);
}

TEST_CASE("normal oracle") {
  const Scene s = unit_sphere();
  CHECK(s.normal(Vec3(1, 0, 0)).isApprox(Vec3(1, 0, 0)));
  CHECK(s.normal(Vec3(0, 0, -1)).isApprox(Vec3(0, 0, -1)));
  CHECK_THROWS_AS(s.normal(Vec3(0.5, 0, 0)), DomainError);
  CHECK_THROWS_AS(s.normal(Vec3(2, 0, 0)), DomainError);

  const Scene b = make_scene(SceneSpec{"b", 0, {box(Vec3(1, 0.5, 0.25))}, 0, std::nullopt});
  CHECK(b.normal(Vec3(1, 0.1, 0.1)).isApprox(Vec3(1, 0, 0)));
  CHECK(b.normal(Vec3(0.3, -0.5, 0.1)).isApprox(Vec3(0, -1, 0)));
  CHECK(b.normal(Vec3(-0.2, 0.2, 0.25)).isApprox(Vec3(0, 0, 1)));

  std::mt19937_64 rng(3);
  const Scene sb = sphere_and_box();
  const auto samples = sb.sample_surface(500, rng);
  for (std::size_t i = 0; i < samples.points.size(); ++i) {
    const Vec3 n = sb.normal(samples.points[i]);
    CHECK(std::abs(n.norm() - 1.0) < 1e-9);
    CHECK(n.isApprox(samples.normals[i], 1e-9));
    CHECK(std::abs(sb.sdf(samples.points[i])) < 1e-9);
  }
}

TEST_CASE("ray intersection agrees with occupancy changes") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Primitive cap;
  cap.kind = PrimitiveKind::Capsule;
  cap.radius = 0.3;
  cap.half_length = 0.4;
  cap.center = Vec3(-0.6, 0.3, 0.0);
  cap.rotation = rotation_from_euler_deg(Vec3(30, 40, 10));
  Primitive b = box(Vec3(0.3, 0.2, 0.4), Vec3(0.5, -0.2, 0.2));
  b.rotation = rotation_from_euler_deg(Vec3(10, 20, 30));
  const Scene s = make_scene(SceneSpec{"mix", 0, {sphere(0.5), cap, b}, 0, std::nullopt});
  int hits = 0;
  for (int k = 0; k < 2000; ++k) {
    const Vec3 o = Vec3(u(rng), u(rng), u(rng)).normalized() * 4.0;
    const Vec3 target(0.5 * u(rng), 0.5 * u(rng), 0.5 * u(rng));
    const Vec3 d = (target - o).normalized();
    const auto hit = s.first_hit(o, d);
    // March finely up to the hit and check nothing is occupied before it.
    const double t_end = hit ? hit->t : 8.0;
    const int steps = 400;
    bool clear = true;
    for (int i = 0; i < steps; ++i) {
      const double t = t_end * (i + 0.5) / steps * (1.0 - 1e-6);
      if (s.sdf(o + t * d) < -1e-9) clear = false;
    }
    CHECK(clear);
    if (hit) {
      ++hits;
      CHECK(std::abs(s.sdf(hit->point)) < 1e-9);
      CHECK(s.occupancy(o + (hit->t + 1e-6) * d) == 1);
      CHECK(hit->normal.dot(d) <= 0.0);
    }
  }
  CHECK(hits > 1000);
}

TEST_CASE("render_ground_truth") {
  Primitive red = sphere(1.0);
  red.texture.color_a = Vec3(1, 0, 0);
  const Scene s = make_scene(SceneSpec{"red", 0, {red}, 0, std::nullopt});
  const Camera cam = Camera::look_at(Vec3(0, -5, 0), Vec3::Zero(), Vec3::UnitZ(), 40.0, 33, 33);
  const auto gt = render_ground_truth(s, cam);
  CHECK(gt.mask.at(16, 16));
  CHECK(gt.image.rgb(16, 16).isApprox(Vec3(1, 0, 0)));
  CHECK(gt.depth[16 * 33 + 16] == doctest::Approx(4.0).epsilon(1e-12));
  CHECK_FALSE(gt.mask.at(0, 0));
  CHECK(gt.image.rgb(0, 0) == Vec3::Zero());
  // Every masked depth is the analytic first hit.
  for (int y = 0; y < 33; ++y)
    for (int x = 0; x < 33; ++x) {
      const Vec3 d = cam.direction(cam.pixel_center(x, y));
      const double b = cam.center().dot(d);
      const double disc = b * b - (cam.center().squaredNorm() - 1.0);
      CHECK(gt.mask.at(x, y) == (disc >= 0.0));
      if (gt.mask.at(x, y)) CHECK(std::abs(gt.depth[y * 33 + x] - (-b - std::sqrt(disc))) < 1e-6);
    }

  const Camera away = Camera::look_at(Vec3(0, -5, 0), Vec3(0, -10, 0), Vec3::UnitZ(), 40.0, 16, 16);
  const auto empty = render_ground_truth(s, away);
  CHECK(empty.mask.count() == 0);

  // Checker sphere: equatorial pixels change color where the texture says so.
  Primitive chk = sphere(1.0);
  chk.texture.kind = TextureKind::Checker;
  chk.texture.frequency = 4.0;
  const Scene cs = make_scene(SceneSpec{"chk", 0, {chk}, 0, std::nullopt});
  const Camera wide = Camera::look_at(Vec3(0, -5, 0.01), Vec3(0, 0, 0.01), Vec3::UnitZ(), 30.0, 64, 64);
  const auto img = render_ground_truth(cs, wide);
  int switches = 0;
  for (int x = 0; x + 1 < 64; ++x) {
    if (!img.mask.at(x, 32) || !img.mask.at(x + 1, 32)) continue;
    const auto h0 = cs.first_hit(wide.center(), wide.direction(wide.pixel_center(x, 32)));
    CHECK(img.image.rgb(x, 32).isApprox(chk.texture.eval(h0->point, 1.0), 1e-6));
    switches += img.image.rgb(x, 32) != img.image.rgb(x + 1, 32);
  }
  CHECK(switches >= 4);
}

TEST_CASE("generate_dataset") {
  const Scene s = unit_sphere();
  const auto data = generate_dataset(s, 6, 32, 32, 3.0);
  REQUIRE(data.views.size() == 6);
  for (std::size_t k = 0; k < 6; ++k) {
    CHECK(data.views[k].mask.count() > 0);
    const double angle = std::atan2(data.views[k].camera.center().y(), data.views[k].camera.center().x());
    CHECK(std::remainder(angle - k * M_PI / 3.0, 2 * M_PI) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(data.views[k].camera.center().norm() == doctest::Approx(3.0));
  }
  CHECK(data.depth_bounds[0] <= 2.0);
  CHECK(data.depth_bounds[1] >= 4.0);
  CHECK(data.depth_bounds[0] < data.depth_bounds[1]);
  // Bounds box lies inside [t_n, t_f] along every masked ray.
  for (const auto& v : data.views)
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) {
        if (!v.mask.at(x, y)) continue;
        const auto iv = data.bounds.ray_interval(v.camera.center(), v.camera.direction(v.camera.pixel_center(x, y)));
        REQUIRE(iv);
        CHECK((*iv)[0] >= data.depth_bounds[0] - 1e-12);
        CHECK((*iv)[1] <= data.depth_bounds[1] + 1e-12);
      }

  const auto two = generate_dataset(s, 2, 16, 16, 3.0);
  CHECK(two.views[0].camera.center().isApprox(-two.views[1].camera.center()));
  CHECK_THROWS_AS(generate_dataset(s, 1, 16, 16, 3.0), ValidationError);
  CHECK_THROWS_AS(generate_dataset(s, 4, 16, 16, 1.0), ValidationError);

  const auto again = generate_dataset(s, 6, 32, 32, 3.0);
  for (std::size_t k = 0; k < 6; ++k) {
    CHECK(again.views[k].image.data == data.views[k].image.data);
    CHECK(again.views[k].mask.data == data.views[k].mask.data);
  }
}
