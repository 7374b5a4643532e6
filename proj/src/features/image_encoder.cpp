#include "dfield/features/image_encoder.hpp"

#include <algorithm>

#include "dfield/errors.hpp"

namespace dfield {

template <class T>
FeatureGrid<T> Conv3x3<T>::operator()(const FeatureGrid<T>& x) const {
  const int ho = (x.height + stride - 1) / stride;
  const int wo = (x.width + stride - 1) / stride;
  // With padding 1 the output of stride s is ceil(H / s).
  std::vector<int> idx(static_cast<std::size_t>(x.views) * ho * wo * 9);
  std::size_t r = 0;
  for (int v = 0; v < x.views; ++v)
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int iy = oy * stride + dy;
            const int ix = ox * stride + dx;
            const bool in = iy >= 0 && iy < x.height && ix >= 0 && ix < x.width;
            idx[r++] = in ? (v * x.height + iy) * x.width + ix : -1;
          }
  const int cin = x.channels();
  ad::Var<T> cols = ad::gather_rows(x.values, ad::make_index(std::move(idx)));
  cols = ad::reshape(cols, static_cast<ad::Index>(x.views) * ho * wo, 9 * cin);
  return FeatureGrid<T>{linear(cols), x.views, ho, wo, x.stride * stride};
}

template <class T>
ImageEncoder<T>::ImageEncoder(ParameterSet<T>& ps, const ImageEncoderConfig& config,
                              std::mt19937_64& rng)
    : config_(config) {
  if (config.channels < 4 || config.stages < 1 || config.refine_blocks < 0) {
    throw ValidationError("image encoder needs channels >= 4 and at least one stage");
  }
  const std::string g = "image_encoder";
  int cin = 3;
  for (int s = 0; s < config.stages; ++s) {
    // Widths ramp C/4, C/2, C, C, ...
    const int cout = std::max(1, config.channels >> std::max(0, config.stages - 2 - s));
    down_.push_back({make_linear(ps, g + ".down" + std::to_string(s), g, 9 * cin, cout, rng), 2});
    cin = cout;
  }
  for (int b = 0; b < config.refine_blocks; ++b) {
    const std::string n = g + ".refine" + std::to_string(b);
    Conv3x3<T> c1{make_linear(ps, n + ".a", g, 9 * cin, cin, rng), 1};
    Conv3x3<T> c2{make_linear(ps, n + ".b", g, 9 * cin, cin, rng, 0.5), 1};
    refine_.emplace_back(c1, c2);
  }
}

template <class T>
FeatureGrid<T> ImageEncoder<T>::operator()(const std::vector<const Image*>& images) const {
  if (images.empty()) throw ValidationError("image encoder needs at least one image");
  const int w = images.front()->width;
  const int h = images.front()->height;
  ad::Matrix<T> px(static_cast<ad::Index>(images.size()) * w * h, 3);
  for (std::size_t v = 0; v < images.size(); ++v) {
    const Image& im = *images[v];
    if (im.width != w || im.height != h || im.channels != 3) {
      throw ValidationError("all input images must be RGB with one shared resolution");
    }
    for (int i = 0; i < w * h; ++i)
      for (int c = 0; c < 3; ++c)
        px(static_cast<ad::Index>(v) * w * h + i, c) = static_cast<T>(2.0 * im.data[i * 3 + c] - 1.0);
  }
  return encode({ad::constant(std::move(px)), static_cast<int>(images.size()), h, w, 1});
}

template <class T>
FeatureGrid<T> ImageEncoder<T>::encode(FeatureGrid<T> x) const {
  for (const auto& conv : down_) {
    x = conv(x);
    x.values = hidden_act(x.values);
  }
  for (const auto& [c1, c2] : refine_) {
    FeatureGrid<T> y = c1(x);
    y.values = hidden_act(y.values);
    y = c2(y);
    x.values = ad::add(x.values, y.values);
  }
  return x;
}

template struct Conv3x3<float>;
template struct Conv3x3<double>;
template class ImageEncoder<float>;
template class ImageEncoder<double>;

}  // namespace dfield
