#include "dfield/features/sampling.hpp"

#include <algorithm>
#include <cmath>

namespace dfield {

namespace {

// Lower corner index and fractional weight along one axis after clamping.
std::pair<int, double> axis_cell(double g, int n) {
  g = std::clamp(g, 0.0, static_cast<double>(n - 1));
  const int i0 = std::min(static_cast<int>(std::floor(g)), std::max(n - 2, 0));
  return {i0, g - i0};
}

}  // namespace

PixelSample sample_pixel_aligned(const FeatureMap& fmap, const Camera& camera, const Vec3& x) {
  PixelSample out{Eigen::VectorXd::Zero(fmap.grid.cols()), false};
  const auto uv = camera.project(x);
  if (!uv) return out;
  const auto [x0, ax] = axis_cell(uv->x() / fmap.stride - 0.5, fmap.width);
  const auto [y0, ay] = axis_cell(uv->y() / fmap.stride - 0.5, fmap.height);
  const int x1 = std::min(x0 + 1, fmap.width - 1);
  const int y1 = std::min(y0 + 1, fmap.height - 1);
  auto cell = [&](int cx, int cy) { return fmap.grid.row(cy * fmap.width + cx).transpose(); };
  out.value = (1 - ax) * (1 - ay) * cell(x0, y0) + ax * (1 - ay) * cell(x1, y0) +
              (1 - ax) * ay * cell(x0, y1) + ax * ay * cell(x1, y1);
  out.valid = true;
  return out;
}

Vec3 per_view_direction(const Camera& camera, const Vec3& d_world) {
  return camera.rotation() * d_world;
}

template <class T>
Projection<T> project_points(const ad::Var<T>& x, const Camera& camera) {
  const ad::Index n = x.rows();
  ad::Matrix<T> rt = camera.rotation().transpose().template cast<T>();
  ad::Matrix<T> t = camera.translation().transpose().template cast<T>();
  Projection<T> p;
  p.cam = ad::add_row(ad::matmul(x, ad::constant(std::move(rt))), ad::constant(std::move(t)));
  // Points behind the camera get a placeholder depth of 1 so the division
  // stays finite; their samples are zeroed later.
  p.valid.resize(n);
  ad::Matrix<T> fix = ad::Matrix<T>::Zero(n, 1);
  for (ad::Index i = 0; i < n; ++i) {
    const T z = p.cam.value()(i, 2);
    p.valid[i] = z > 0;
    if (!p.valid[i]) fix(i, 0) = 1 - z;
  }
  const auto z = ad::add(ad::slice_cols(p.cam, 2, 1), ad::constant(std::move(fix)));
  const auto inv_z = ad::reciprocal(z);
  const auto& k = camera.intrinsics();
  p.u = ad::add_scalar(ad::scale(ad::mul(ad::slice_cols(p.cam, 0, 1), inv_z), k.fx), k.cx);
  p.v = ad::add_scalar(ad::scale(ad::mul(ad::slice_cols(p.cam, 1, 1), inv_z), k.fy), k.cy);
  return p;
}

template <class T>
ad::Var<T> sample_grid(const ad::Var<T>& grid, int offset, int height, int width, double stride,
                       const Projection<T>& proj) {
  const ad::Index n = proj.u.rows();
  auto coord = [&](const ad::Var<T>& pix, int cells, std::vector<int>& i0, std::vector<int>& i1) {
    const auto g = ad::clamp(ad::add_scalar(ad::scale(pix, 1.0 / stride), -0.5), 0.0, cells - 1.0);
    ad::Matrix<T> base(n, 1);
    i0.resize(n);
    i1.resize(n);
    for (ad::Index r = 0; r < n; ++r) {
      i0[r] = std::min(static_cast<int>(std::floor(g.value()(r, 0))), std::max(cells - 2, 0));
      i1[r] = std::min(i0[r] + 1, cells - 1);
      base(r, 0) = static_cast<T>(i0[r]);
    }
    return ad::sub(g, ad::constant(std::move(base)));  // fractional part, differentiable
  };
  std::vector<int> x0, x1, y0, y1;
  const auto ax = coord(proj.u, width, x0, x1);
  const auto ay = coord(proj.v, height, y0, y1);
  ad::Matrix<T> valid(n, 1);
  for (ad::Index r = 0; r < n; ++r) valid(r, 0) = proj.valid[r] ? T(1) : T(0);
  const auto vmask = ad::constant(std::move(valid));
  const auto bx = ad::sub(vmask, ad::mul(ax, vmask));  // (1 - ax) on valid rows
  const auto by = ad::add_scalar(ad::neg(ay), 1.0);
  const auto axv = ad::mul(ax, vmask);

  auto corner = [&](const std::vector<int>& xs, const std::vector<int>& ys, const ad::Var<T>& w) {
    std::vector<int> idx(n);
    for (ad::Index r = 0; r < n; ++r) idx[r] = proj.valid[r] ? offset + ys[r] * width + xs[r] : -1;
    return ad::mul_col(ad::gather_rows(grid, ad::make_index(std::move(idx))), w);
  };
  auto out = corner(x0, y0, ad::mul(bx, by));
  out = ad::add(out, corner(x1, y0, ad::mul(axv, by)));
  out = ad::add(out, corner(x0, y1, ad::mul(bx, ay)));
  out = ad::add(out, corner(x1, y1, ad::mul(axv, ay)));
  return out;
}

template <class T>
ad::Var<T> normalize_rows(const ad::Var<T>& x) {
  return ad::mul_col(x, ad::reciprocal(ad::sqrt(ad::sum_cols(ad::square(x)))));
}

#define DFIELD_SAMPLING_INSTANTIATE(T)                                                        \
  template Projection<T> project_points(const ad::Var<T>&, const Camera&);                   \
  template ad::Var<T> sample_grid(const ad::Var<T>&, int, int, int, double, const Projection<T>&); \
  template ad::Var<T> normalize_rows(const ad::Var<T>&);

DFIELD_SAMPLING_INSTANTIATE(float)
DFIELD_SAMPLING_INSTANTIATE(double)

}  // namespace dfield
