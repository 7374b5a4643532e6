#pragma once

#include <Eigen/Core>

#include "dfield/ad/ops.hpp"
#include "dfield/scene/geometry.hpp"

namespace dfield {

// Sinusoidal encoding: for each component p and band k < L, emits
// sin(2^k pi p), cos(2^k pi p). Component-major, band-minor, sin first.
Eigen::VectorXd positional_encoding(const Eigen::VectorXd& x, int bands);

// Same encoding applied to an RGB value; throws DomainError outside [0, 1].
Eigen::VectorXd colored_encoding(const Vec3& rgb, int bands);

// Row-wise batched encoding of an N x D input into N x 2LD.
template <class T>
ad::Var<T> positional_encoding(const ad::Var<T>& x, int bands);

}  // namespace dfield
