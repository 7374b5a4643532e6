#pragma once

#include <Eigen/Core>

#include <vector>

#include "dfield/ad/ops.hpp"
#include "dfield/scene/camera.hpp"

namespace dfield {

// One view's feature map: cell (x, y) is row y * width + x of `grid`.
struct FeatureMap {
  int height = 0;
  int width = 0;
  int stride = 1;
  int source_view = 0;
  Eigen::MatrixXd grid;  // (height * width) x C
};

struct PixelSample {
  Eigen::VectorXd value;
  bool valid = false;
};

// Bilinear lookup at the projection of x. Cell centers sit at pixel
// coordinates ((i + 0.5) stride, (j + 0.5) stride); out-of-image projections
// clamp to the border; points at depth <= 0 give zeros and valid = false.
PixelSample sample_pixel_aligned(const FeatureMap& fmap, const Camera& camera, const Vec3& x);

// Direction expressed in the camera frame: R d.
Vec3 per_view_direction(const Camera& camera, const Vec3& d_world);

// Differentiable counterparts for a batch of points (rows of an N x 3 input).
template <class T>
struct Projection {
  ad::Var<T> cam;  // N x 3 camera-frame coordinates
  ad::Var<T> u;    // N x 1 continuous pixel coordinates
  ad::Var<T> v;
  std::vector<char> valid;
};

template <class T>
Projection<T> project_points(const ad::Var<T>& x, const Camera& camera);

// Bilinear sampling of a grid block holding `height` x `width` cells starting
// at row `offset` of `grid`. Invalid rows come out as zeros.
template <class T>
ad::Var<T> sample_grid(const ad::Var<T>& grid, int offset, int height, int width, double stride,
                       const Projection<T>& proj);

// Unit rows.
template <class T>
ad::Var<T> normalize_rows(const ad::Var<T>& x);

}  // namespace dfield
