#include "dfield/features/encoding.hpp"

#include <cmath>

#include "dfield/errors.hpp"

namespace dfield {

Eigen::VectorXd positional_encoding(const Eigen::VectorXd& x, int bands) {
  if (bands < 1) throw ValidationError("positional encoding needs at least one band");
  Eigen::VectorXd out(2 * bands * x.size());
  for (Eigen::Index d = 0; d < x.size(); ++d) {
    double f = M_PI;
    for (int k = 0; k < bands; ++k, f *= 2.0) {
      out[d * 2 * bands + 2 * k] = std::sin(f * x[d]);
      out[d * 2 * bands + 2 * k + 1] = std::cos(f * x[d]);
    }
  }
  return out;
}

Eigen::VectorXd colored_encoding(const Vec3& rgb, int bands) {
  if (!((rgb.array() >= 0.0).all() && (rgb.array() <= 1.0).all())) {
    throw DomainError("colored encoding expects RGB components in [0, 1]");
  }
  return positional_encoding(Eigen::VectorXd(rgb), bands);
}

template <class T>
ad::Var<T> positional_encoding(const ad::Var<T>& x, int bands) {
  if (bands < 1) throw ValidationError("positional encoding needs at least one band");
  const Eigen::Index dims = x.cols();
  ad::Matrix<T> freq = ad::Matrix<T>::Zero(dims, 2 * bands * dims);
  ad::Matrix<T> phase(1, 2 * bands * dims);
  for (Eigen::Index d = 0; d < dims; ++d) {
    double f = M_PI;
    for (int k = 0; k < bands; ++k, f *= 2.0) {
      const Eigen::Index c = d * 2 * bands + 2 * k;
      freq(d, c) = freq(d, c + 1) = static_cast<T>(f);
      phase(0, c) = 0;
      phase(0, c + 1) = static_cast<T>(M_PI / 2);  // cos t = sin(t + pi/2)
    }
  }
  return ad::sin(ad::add_row(ad::matmul(x, ad::constant(std::move(freq))),
                             ad::constant(std::move(phase))));
}

template ad::Var<float> positional_encoding(const ad::Var<float>&, int);
template ad::Var<double> positional_encoding(const ad::Var<double>&, int);

}  // namespace dfield
