#pragma once

#include <algorithm>
#include <functional>
#include <random>

#include "dfield/ad/ops.hpp"
#include "dfield/core/model.hpp"
#include "dfield/scene/dataset.hpp"
#include "dfield/scene/scene.hpp"

namespace testing {

using Md = dfield::ad::Matrix<double>;
using Vd = dfield::ad::Var<double>;

inline double max_rel_err(const Md& a, const Md& b) {
  const double scale = std::max(1.0, std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()));
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

inline Md random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double s = 1.0) {
  std::normal_distribution<double> n(0.0, s);
  Md m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Central differences of a scalar function of one matrix.
inline Md central_diff(const std::function<double(const Md&)>& f, const Md& x, double h) {
  Md g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Md a = x, b = x;
    a.data()[i] += h;
    b.data()[i] -= h;
    g.data()[i] = (f(a) - f(b)) / (2 * h);
  }
  return g;
}

// Fixed random weighting so reductions do not hide per-entry errors.
inline Vd weighted(const Vd& v, unsigned seed) {
  std::mt19937_64 rng(seed);
  return dfield::ad::sum(dfield::ad::mul(v, dfield::ad::constant(random_matrix(v.rows(), v.cols(), rng))));
}

inline dfield::Primitive sphere(double r, dfield::Vec3 c = dfield::Vec3::Zero()) {
  dfield::Primitive p;
  p.kind = dfield::PrimitiveKind::Sphere;
  p.radius = r;
  p.center = c;
  return p;
}

inline dfield::Primitive box(dfield::Vec3 half, dfield::Vec3 c = dfield::Vec3::Zero()) {
  dfield::Primitive p;
  p.kind = dfield::PrimitiveKind::Box;
  p.half_extents = half;
  p.center = c;
  return p;
}

inline dfield::Scene unit_sphere_scene() {
  return dfield::make_scene(dfield::SceneSpec{"sphere", 0, {sphere(1.0)}, 0, std::nullopt});
}

// A very small network for fast structural tests.
inline dfield::ModelConfig tiny_config(std::uint64_t seed = 3) {
  dfield::ModelConfig c;
  c.feature_channels = 8;
  c.encoder_stages = 2;
  c.refine_blocks = 1;
  c.pos_bands = 2;
  c.col_bands = 2;
  c.dir_bands = 2;
  c.hidden = 16;
  c.double_layers = 2;
  c.geometry_layers = 1;
  c.texture_layers = 1;
  c.encoder_dim = 16;
  c.decoder_dim = 8;
  c.ffn = 16;
  c.heads = 2;
  c.seed = seed;
  return c;
}

}  // namespace testing
