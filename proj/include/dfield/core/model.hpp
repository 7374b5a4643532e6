#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dfield/core/nn.hpp"
#include "dfield/core/transformer.hpp"
#include "dfield/features/image_encoder.hpp"
#include "dfield/scene/dataset.hpp"

namespace dfield {

enum class FusionMode { Transformer, AveragePooling };

struct ModelConfig {
  int feature_channels = 64;
  int encoder_stages = 4;
  int refine_blocks = 2;
  int pos_bands = 6;  // gamma(x)
  int col_bands = 4;  // gamma(p)
  int dir_bands = 4;  // query and view directions
  int hidden = 256;   // width of the double, geometry and texture MLPs
  int double_layers = 4;
  int geometry_layers = 2;
  int texture_layers = 3;
  int encoder_dim = 256;
  int decoder_dim = 128;
  int ffn = 512;
  int heads = 4;
  // Initial bias of the density logit. Opacity across the fine interval then
  // starts near 0.9 instead of near zero.
  double density_bias = 20.0;
  FusionMode fusion = FusionMode::Transformer;
  bool shared_double_mlp = true;
  bool colored_encoding = true;
  std::uint64_t seed = 0;
};

// Parameter groups.
namespace group {
inline const std::string kImageEncoder = "image_encoder";
inline const std::string kViewEncoder = "transformer_encoder";
inline const std::string kDoubleMlp = "double_mlp";
inline const std::string kGeometry = "geometry_mlp";
inline const std::string kDecoder = "transformer_decoder";
inline const std::string kTexture = "texture_mlp";
}  // namespace group

template <class T>
class DoubleField {
 public:
  explicit DoubleField(const ModelConfig& config);
  DoubleField(const DoubleField&) = delete;
  DoubleField& operator=(const DoubleField&) = delete;

  const ModelConfig& config() const { return config_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }

  // e_db from gamma(x) and the fused feature.
  ad::Var<T> double_embed(const ad::Var<T>& gamma_x, const ad::Var<T>& fused, bool density_trunk = false) const;
  // Raw (logit_s, logit_sigma) from e_db; columns 0 and 1.
  ad::Var<T> geometry_logits(const ad::Var<T>& e_db, bool density_trunk = false) const;
  // Sigmoid RGB from the color embedding.
  ad::Var<T> texture_head(const ad::Var<T>& e_c) const;

  int pixel_code_dim() const { return config_.colored_encoding ? 6 * config_.col_bands : 3; }
  int fused_dim() const;
  int texture_in_dim() const;

  ImageEncoder<T> image_encoder;
  ViewEncoder<T> view_encoder;  // transformer fusion
  Linear<T> pool;               // average-pooling fusion
  Mlp<T> double_mlp;
  Mlp<T> double_mlp_density;    // only without the shared double MLP
  Mlp<T> geometry;
  Mlp<T> geometry_density;      // only without the shared double MLP
  QueryDecoder<T> decoder;
  Mlp<T> texture;

 private:
  ModelConfig config_;
  ParameterSet<T> params_;
};

// Copies parameters between precisions (same config).
template <class To, class From>
void copy_parameters(const DoubleField<From>& from, DoubleField<To>& to) {
  to.params().load(from.params().to_map());
}

// Everything the field needs from the input views of one scene.
template <class T>
struct Conditioning {
  std::vector<Camera> cameras;
  FeatureGrid<T> features;
  std::vector<ad::Var<T>> images;  // per view, (H*W) x 3 constants
  int image_width = 0;
  int image_height = 0;
  Aabb bounds;

  int views() const { return static_cast<int>(cameras.size()); }
};

// Throws ValidationError when `view_ids` is empty or out of range.
template <class T>
Conditioning<T> make_conditioning(const DoubleField<T>& model, const MultiViewSample& sample,
                                  const std::vector<int>& view_ids);

enum FieldPart : int { kOccupancy = 1, kDensity = 2, kColor = 4, kAll = 7 };

template <class T>
struct FieldBatch {
  ad::Var<T> s;      // N x 1
  ad::Var<T> sigma;  // N x 1
  ad::Var<T> color;  // N x 3
};

// x: N x 3 world points; d_q: N x 3 unit query directions (needed for color).
template <class T>
FieldBatch<T> evaluate(const DoubleField<T>& model, const Conditioning<T>& cond, const ad::Var<T>& x,
                       const ad::Var<T>& d_q, int parts = kAll);

struct FieldOutput {
  double s = 0.0;
  double sigma = 0.0;
  Vec3 c = Vec3::Zero();
};

// Inference over all views of `sample`, processed in chunks.
template <class T>
std::vector<FieldOutput> evaluate_field(const DoubleField<T>& model, const MultiViewSample& sample,
                                        const std::vector<Vec3>& xs, const Vec3& d_q);

}  // namespace dfield
