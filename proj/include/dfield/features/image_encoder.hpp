#pragma once

#include <random>
#include <vector>

#include "dfield/core/nn.hpp"
#include "dfield/scene/image.hpp"

namespace dfield {

struct ImageEncoderConfig {
  int channels = 64;     // output channels C
  int stages = 4;        // stride-2 stages, total stride 2^stages
  int refine_blocks = 2;  // residual 3x3 blocks at full width
};

// Feature maps of several views stacked into one matrix: the cell (x, y) of
// view v is row (v * height + y) * width + x.
template <class T>
struct FeatureGrid {
  ad::Var<T> values;
  int views = 0;
  int height = 0;
  int width = 0;
  int stride = 1;

  int channels() const { return static_cast<int>(values.cols()); }
};

// 3x3 convolution with zero padding over the stacked layout above, lowered to
// a row gather plus one matrix product.
template <class T>
struct Conv3x3 {
  Linear<T> linear;  // (9 * in) x out
  int stride = 1;

  FeatureGrid<T> operator()(const FeatureGrid<T>& x) const;
};

template <class T>
class ImageEncoder {
 public:
  ImageEncoder() = default;
  ImageEncoder(ParameterSet<T>& ps, const ImageEncoderConfig& config, std::mt19937_64& rng);

  // Images must share one resolution. Pixels are mapped to [-1, 1] first.
  FeatureGrid<T> operator()(const std::vector<const Image*>& images) const;
  // Same network on an already mapped, stacked pixel grid (3 channels).
  FeatureGrid<T> encode(FeatureGrid<T> pixels) const;
  int stride() const { return 1 << config_.stages; }
  const ImageEncoderConfig& config() const { return config_; }

 private:
  ImageEncoderConfig config_;
  std::vector<Conv3x3<T>> down_;
  std::vector<std::pair<Conv3x3<T>, Conv3x3<T>>> refine_;
};

}  // namespace dfield
