#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "dfield/errors.hpp"
#include "dfield/features/encoding.hpp"
#include "dfield/features/image_encoder.hpp"
#include "dfield/features/sampling.hpp"
#include "support.hpp"

using namespace dfield;
using namespace testing;

namespace {

Image random_image(int w, int h, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Image im(w, h, 3);
  for (auto& v : im.data) v = u(rng);
  return im;
}

Camera axis_camera() {
  return Camera(Intrinsics{32, 32, 16, 16}, Mat3::Identity(), Vec3::Zero(), 32, 32);
}

FeatureMap random_map(std::mt19937_64& rng) {
  FeatureMap m;
  m.height = 8;
  m.width = 8;
  m.stride = 4;
  m.grid = random_matrix(64, 5, rng);
  return m;
}

}  // namespace

TEST_CASE("positional encoding worked values") {
  Eigen::VectorXd e = positional_encoding(Eigen::Vector3d::Zero(), 2);
  REQUIRE(e.size() == 12);
  for (int i = 0; i < 12; ++i) CHECK(e[i] == doctest::Approx(i % 2 ? 1.0 : 0.0));

  e = positional_encoding(Eigen::VectorXd::Constant(1, 1.0), 1);
  CHECK(e[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(e[1] == doctest::Approx(-1.0));

  e = positional_encoding(Eigen::VectorXd::Constant(1, 0.5), 2);
  CHECK(std::abs(e[0] - 1.0) < 1e-12);
  CHECK(std::abs(e[1]) < 1e-12);
  CHECK(std::abs(e[2]) < 1e-12);
  CHECK(std::abs(e[3] + 1.0) < 1e-12);
}

TEST_CASE("batched encoding agrees with the scalar form and stays in range") {
  std::mt19937_64 rng(4);
  const Md x = random_matrix(50, 3, rng, 2.0);
  const auto enc = positional_encoding(ad::constant(x), 5);
  REQUIRE(enc.cols() == 30);
  double worst = 0.0;
  for (int r = 0; r < 50; ++r) {
    const Eigen::VectorXd ref = positional_encoding(Eigen::VectorXd(x.row(r).transpose()), 5);
    worst = std::max(worst, (enc.value().row(r).transpose() - ref).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-12);
  CHECK(enc.value().cwiseAbs().maxCoeff() <= 1.0);
}

TEST_CASE("first band pair separates points of [-1, 1)") {
  std::set<std::pair<long, long>> seen;
  for (int i = 0; i < 1000; ++i) {
    const double p = -1.0 + 2.0 * i / 1000.0;
    const Eigen::VectorXd e = positional_encoding(Eigen::VectorXd::Constant(1, p), 1);
    seen.emplace(std::lround(e[0] * 1e6), std::lround(e[1] * 1e6));
  }
  CHECK(seen.size() == 1000);
}

TEST_CASE("colored encoding") {
  Eigen::VectorXd e = colored_encoding(Vec3::Zero(), 2);
  REQUIRE(e.size() == 12);
  for (int i = 0; i < 12; ++i) CHECK(e[i] == doctest::Approx(i % 2 ? 1.0 : 0.0));

  e = colored_encoding(Vec3::Ones(), 1);
  for (int c = 0; c < 3; ++c) {
    CHECK(std::abs(e[2 * c]) < 1e-12);
    CHECK(e[2 * c + 1] == doctest::Approx(-1.0));
  }

  e = colored_encoding(Vec3(0.25, 0.5, 0.75), 1);
  const double r = std::sqrt(0.5);
  const double expected[6] = {r, r, 1.0, 0.0, r, -r};
  for (int i = 0; i < 6; ++i) CHECK(std::abs(e[i] - expected[i]) < 1e-12);

  CHECK_THROWS_AS(colored_encoding(Vec3(0.5, 1.01, 0.0), 2), DomainError);
  CHECK_THROWS_AS(colored_encoding(Vec3(-0.1, 0.0, 0.0), 2), DomainError);
}

TEST_CASE("pixel-aligned sampling: nodes, midpoints, constants") {
  std::mt19937_64 rng(5);
  const FeatureMap m = random_map(rng);
  const Camera cam = axis_camera();

  for (int j = 0; j < 8; ++j)
    for (int i = 0; i < 8; ++i) {
      const Vec3 x = cam.unproject(Vec2((i + 0.5) * 4, (j + 0.5) * 4), 2.0);
      const auto s = sample_pixel_aligned(m, cam, x);
      CHECK(s.valid);
      CHECK((s.value - m.grid.row(j * 8 + i).transpose()).cwiseAbs().maxCoeff() < 1e-9);
    }

  const Vec3 mid = cam.unproject(Vec2(3 * 4, 2.5 * 4), 3.0);  // between cells (2,2) and (3,2)
  const Eigen::VectorXd mean = 0.5 * (m.grid.row(2 * 8 + 2) + m.grid.row(2 * 8 + 3)).transpose();
  CHECK((sample_pixel_aligned(m, cam, mid).value - mean).cwiseAbs().maxCoeff() < 1e-9);

  FeatureMap c = m;
  c.grid.rowwise() = Eigen::RowVectorXd::LinSpaced(5, -1.0, 1.0);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int k = 0; k < 100; ++k) {
    const Vec3 x(u(rng), u(rng), 1.0 + u(rng) + 1.0);
    CHECK((sample_pixel_aligned(c, cam, x).value - c.grid.row(0).transpose()).cwiseAbs().maxCoeff() < 1e-12);
  }
  // Far outside the frustum: clamped to the border, still valid.
  CHECK(sample_pixel_aligned(c, cam, Vec3(50, 0, 1)).valid);
}

TEST_CASE("pixel-aligned sampling is linear along grid lines") {
  std::mt19937_64 rng(6);
  const FeatureMap m = random_map(rng);
  const Camera cam = axis_camera();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    // A horizontal or vertical segment inside one interpolation cell.
    const int ci = static_cast<int>(u(rng) * 7), cj = static_cast<int>(u(rng) * 7);
    const double lo = u(rng), hi = u(rng), across = u(rng);
    auto pix = [&](double t) {
      return k % 2 ? Vec2((ci + 0.5 + t) * 4, (cj + 0.5 + across) * 4)
                   : Vec2((ci + 0.5 + across) * 4, (cj + 0.5 + t) * 4);
    };
    auto f = [&](double t) { return sample_pixel_aligned(m, cam, cam.unproject(pix(t), 2.0)).value; };
    const Eigen::VectorXd diff = f(0.5 * (lo + hi)) - 0.5 * (f(lo) + f(hi));
    CHECK(diff.cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("points behind the camera are invalid") {
  std::mt19937_64 rng(7);
  const FeatureMap m = random_map(rng);
  const auto s = sample_pixel_aligned(m, axis_camera(), Vec3(0.1, 0.1, -1.0));
  CHECK_FALSE(s.valid);
  CHECK(s.value.isZero());

  Md x(2, 3);
  x << 0.1, 0.1, -1.0, 0.1, 0.2, 2.0;
  const auto proj = project_points(ad::constant(x), axis_camera());
  const auto v = sample_grid(ad::constant(Md(m.grid)), 0, 8, 8, 4.0, proj);
  CHECK(v.value().row(0).isZero());
  const auto ref = sample_pixel_aligned(m, axis_camera(), Vec3(0.1, 0.2, 2.0));
  CHECK((v.value().row(1).transpose() - ref.value).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("batched sampling matches the single-point lookup") {
  std::mt19937_64 rng(8);
  const FeatureMap m = random_map(rng);
  const Camera cam = Camera::look_at(Vec3(0.3, -0.2, -3.0), Vec3::Zero(), Vec3(0, -1, 0), 50, 32, 32);
  const Md x = random_matrix(300, 3, rng, 1.5);
  const auto v = sample_grid(ad::constant(Md(m.grid)), 0, 8, 8, 4.0, project_points(ad::constant(x), cam));
  double worst = 0.0;
  for (int r = 0; r < 300; ++r) {
    const auto s = sample_pixel_aligned(m, cam, Vec3(x.row(r).transpose()));
    worst = std::max(worst, (v.value().row(r).transpose() - s.value).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("per-view direction") {
  const Camera id = axis_camera();
  CHECK(per_view_direction(id, Vec3(0.6, 0.0, 0.8)).isApprox(Vec3(0.6, 0.0, 0.8)));

  const Mat3 yaw = Eigen::AngleAxisd(M_PI, Vec3::UnitY()).toRotationMatrix();
  const Camera turned(Intrinsics{32, 32, 16, 16}, yaw, Vec3::Zero(), 32, 32);
  CHECK((per_view_direction(turned, Vec3::UnitZ()) - Vec3(0, 0, -1)).norm() < 1e-12);

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-180, 180);
  for (int k = 0; k < 100; ++k) {
    const Camera c(Intrinsics{32, 32, 16, 16}, rotation_from_euler_deg(Vec3(u(rng), u(rng), u(rng))),
                   Vec3::Zero(), 32, 32);
    const Vec3 d = Vec3(u(rng), u(rng), u(rng)).normalized();
    CHECK(std::abs(per_view_direction(c, d).norm() - 1.0) < 1e-6);
  }
}

TEST_CASE("image encoder shape and determinism") {
  ParameterSet<double> ps;
  std::mt19937_64 rng(10);
  ImageEncoder<double> enc(ps, ImageEncoderConfig{}, rng);
  const Image im = random_image(512, 512, rng);
  const auto f = enc({&im, &im});
  CHECK(f.width == 32);
  CHECK(f.height == 32);
  CHECK(f.stride == 16);
  CHECK(f.channels() == 64);
  CHECK(f.views == 2);
  const Md& v = f.values.value();
  CHECK(v.allFinite());
  CHECK(v.topRows(1024) == v.bottomRows(1024));

  // Odd sizes round up.
  const Image odd = random_image(37, 21, rng);
  const auto g = enc({&odd});
  CHECK(g.width == 3);
  CHECK(g.height == 2);
}

TEST_CASE("image encoder is equivariant to view order") {
  ParameterSet<double> ps;
  std::mt19937_64 rng(11);
  ImageEncoder<double> enc(ps, ImageEncoderConfig{8, 2, 1}, rng);
  const Image a = random_image(16, 12, rng), b = random_image(16, 12, rng), c = random_image(16, 12, rng);
  const Md f = enc({&a, &b, &c}).values.value();
  const Md g = enc({&c, &a, &b}).values.value();
  const int cells = 4 * 3;
  CHECK(f.middleRows(0, cells) == g.middleRows(cells, cells));
  CHECK(f.middleRows(cells, cells) == g.middleRows(2 * cells, cells));
  CHECK(f.middleRows(2 * cells, cells) == g.middleRows(0, cells));
}

TEST_CASE("image encoder input gradient matches finite differences") {
  ParameterSet<double> ps;
  std::mt19937_64 rng(12);
  ImageEncoder<double> enc(ps, ImageEncoderConfig{8, 2, 1}, rng);
  // An all-zero 8x8 image, already mapped to [-1, 1].
  const Md px = Md::Constant(64, 3, -1.0);
  auto total = [&](const Vd& x) { return ad::sum(enc.encode(FeatureGrid<double>{x, 1, 8, 8, 1}).values); };
  const Vd x = ad::parameter(px);
  const auto y = total(x);
  CHECK(y.value().allFinite());
  const Md analytic = ad::grad(y, {x})[0].value();
  const Md numeric = central_diff([&](const Md& m) { return total(ad::constant(m)).item(); }, px, 1e-5);
  CHECK(max_rel_err(analytic, numeric) < 1e-3);
  CHECK(analytic.cwiseAbs().maxCoeff() > 0.0);
}
