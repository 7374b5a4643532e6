#include "dfield/core/model.hpp"

#include <algorithm>

#include "dfield/errors.hpp"
#include "dfield/features/encoding.hpp"
#include "dfield/features/sampling.hpp"

namespace dfield {

namespace {

void validate(const ModelConfig& c) {
  auto positive = [](int v, const char* what) {
    if (v < 1) throw ValidationError(std::string("model: ") + what + " must be at least 1");
  };
  positive(c.feature_channels, "feature_channels");
  positive(c.encoder_stages, "encoder_stages");
  positive(c.pos_bands, "pos_bands");
  positive(c.col_bands, "col_bands");
  positive(c.dir_bands, "dir_bands");
  positive(c.hidden, "hidden");
  positive(c.double_layers, "double_layers");
  positive(c.geometry_layers, "geometry_layers");
  positive(c.texture_layers, "texture_layers");
  positive(c.encoder_dim, "encoder_dim");
  positive(c.decoder_dim, "decoder_dim");
  positive(c.ffn, "ffn");
  positive(c.heads, "heads");
  if (c.refine_blocks < 0) throw ValidationError("model: refine_blocks must be non-negative");
  if (c.encoder_dim % c.heads || c.decoder_dim % c.heads) {
    throw ValidationError("model: encoder_dim and decoder_dim must be divisible by heads");
  }
}

std::vector<int> widths(int in, int hidden, int layers, int out) {
  std::vector<int> w{in};
  for (int i = 0; i < layers; ++i) w.push_back(hidden);
  if (out > 0) w.push_back(out);
  return w;
}

}  // namespace

template <class T>
DoubleField<T>::DoubleField(const ModelConfig& config) : config_(config) {
  validate(config);
  std::mt19937_64 rng(config.seed);
  const auto& c = config;
  image_encoder = ImageEncoder<T>(params_, {c.feature_channels, c.encoder_stages, c.refine_blocks}, rng);
  const int token_dim = c.feature_channels + 3;
  if (c.fusion == FusionMode::Transformer) {
    view_encoder = make_view_encoder(params_, group::kViewEncoder, token_dim, c.encoder_dim, c.ffn,
                                     c.heads, rng);
  } else {
    pool = make_linear(params_, group::kViewEncoder + ".pool", group::kViewEncoder, token_dim,
                       c.encoder_dim, rng, 1.0);
  }
  const int gdim = 6 * c.pos_bands;
  MlpShape db{widths(gdim + c.encoder_dim, c.hidden, c.double_layers, 0), false, 1.0,
              c.double_layers / 2, gdim};
  if (c.double_layers < 2) db.skip_at = -1;
  double_mlp = make_mlp(params_, group::kDoubleMlp, group::kDoubleMlp, db, rng);
  MlpShape geo{widths(c.hidden, c.hidden, c.geometry_layers, 2), false, 0.1};
  geometry = make_mlp(params_, group::kGeometry, group::kGeometry, geo, rng);
  if (!c.shared_double_mlp) {
    double_mlp_density = make_mlp(params_, group::kDoubleMlp + ".density", group::kDoubleMlp, db, rng);
    geometry_density = make_mlp(params_, group::kGeometry + ".density", group::kGeometry, geo, rng);
  }
  for (auto* g : {&geometry, &geometry_density}) {
    if (!g->layers.empty()) g->layers.back().bias.mutable_value()(0, 1) = static_cast<T>(c.density_bias);
  }
  if (c.fusion == FusionMode::Transformer) {
    decoder = make_query_decoder(params_, group::kDecoder, c.hidden, pixel_code_dim(), c.decoder_dim,
                                 c.ffn, c.heads, c.dir_bands, rng);
  }
  texture = make_mlp(params_, group::kTexture, group::kTexture,
                     MlpShape{widths(texture_in_dim(), c.hidden, c.texture_layers, 3), false, 0.1}, rng);
}

template <class T>
int DoubleField<T>::fused_dim() const {
  return config_.encoder_dim;
}

template <class T>
int DoubleField<T>::texture_in_dim() const {
  return config_.fusion == FusionMode::Transformer ? config_.decoder_dim
                                                   : config_.hidden + 6 * config_.dir_bands;
}

template <class T>
ad::Var<T> DoubleField<T>::double_embed(const ad::Var<T>& gamma_x, const ad::Var<T>& fused,
                                        bool density_trunk) const {
  if (gamma_x.cols() != 6 * config_.pos_bands || fused.cols() != fused_dim() ||
      gamma_x.rows() != fused.rows()) {
    throw ValidationError("double_embed: input dimensions do not match the model config");
  }
  const auto& mlp = density_trunk && !config_.shared_double_mlp ? double_mlp_density : double_mlp;
  return mlp(ad::concat_cols<T>({gamma_x, fused}), gamma_x);
}

template <class T>
ad::Var<T> DoubleField<T>::geometry_logits(const ad::Var<T>& e_db, bool density_trunk) const {
  const auto& mlp = density_trunk && !config_.shared_double_mlp ? geometry_density : geometry;
  return mlp(e_db);
}

template <class T>
ad::Var<T> DoubleField<T>::texture_head(const ad::Var<T>& e_c) const {
  return ad::sigmoid(texture(e_c));
}

template <class T>
Conditioning<T> make_conditioning(const DoubleField<T>& model, const MultiViewSample& sample,
                                  const std::vector<int>& view_ids) {
  if (view_ids.empty()) throw ValidationError("conditioning needs at least one input view");
  ad::FlushDenormals ftz;
  Conditioning<T> c;
  c.bounds = sample.bounds;
  std::vector<const Image*> images;
  for (int id : view_ids) {
    if (id < 0 || id >= static_cast<int>(sample.views.size())) {
      throw ValidationError("input view index out of range");
    }
    const View& v = sample.views[id];
    c.cameras.push_back(v.camera);
    images.push_back(&v.image);
    ad::Matrix<T> px(static_cast<ad::Index>(v.image.width) * v.image.height, 3);
    for (ad::Index i = 0; i < px.rows(); ++i)
      for (int k = 0; k < 3; ++k) px(i, k) = static_cast<T>(v.image.data[i * 3 + k]);
    c.images.push_back(ad::constant(std::move(px)));
  }
  c.image_width = images.front()->width;
  c.image_height = images.front()->height;
  c.features = model.image_encoder(images);
  return c;
}

template <class T>
FieldBatch<T> evaluate(const DoubleField<T>& model, const Conditioning<T>& cond,
                       const ad::Var<T>& x, const ad::Var<T>& d_q, int parts) {
  ad::FlushDenormals ftz;
  const auto& cfg = model.config();
  const int n = cond.views();
  const ad::Index batch = x.rows();
  if (n < 1) throw ValidationError("field evaluation needs at least one view");
  const bool want_color = parts & kColor;
  if (want_color && (!d_q.defined() || d_q.rows() != batch)) {
    throw ValidationError("color evaluation needs one query direction per point");
  }

  const Vec3 center = cond.bounds.center();
  const Vec3 half = cond.bounds.half_extent();
  ad::Matrix<T> inv = ad::Matrix<T>::Zero(3, 3);
  ad::Matrix<T> shift(1, 3);
  for (int a = 0; a < 3; ++a) {
    inv(a, a) = static_cast<T>(1.0 / half[a]);
    shift(0, a) = static_cast<T>(-center[a] / half[a]);
  }
  const auto gamma_x = positional_encoding(
      ad::add_row(ad::matmul(x, ad::constant(std::move(inv))), ad::constant(std::move(shift))),
      cfg.pos_bands);

  const auto& fg = cond.features;
  std::vector<ad::Var<T>> tokens, dirs, codes;
  for (int i = 0; i < n; ++i) {
    const auto proj = project_points(x, cond.cameras[i]);
    const auto phi = sample_grid(fg.values, i * fg.height * fg.width, fg.height, fg.width,
                                 static_cast<double>(fg.stride), proj);
    tokens.push_back(ad::concat_cols<T>({phi, normalize_rows(proj.cam)}));
    if (want_color) {
      auto p = ad::clamp(sample_grid(cond.images[i], 0, cond.image_height, cond.image_width, 1.0, proj), 0.0, 1.0);
      codes.push_back(cfg.colored_encoding ? positional_encoding(p, cfg.col_bands) : p);
      ad::Matrix<T> c = (-cond.cameras[i].center()).transpose().template cast<T>();
      dirs.push_back(normalize_rows(ad::add_row(x, ad::constant(std::move(c)))));
    }
  }
  const auto token_mat = ad::concat_rows(tokens);
  const auto fused = cfg.fusion == FusionMode::Transformer
                         ? model.view_encoder(token_mat, n, batch)
                         : fuse_average_pooling(model.pool, token_mat, n, batch);

  FieldBatch<T> out;
  const double diag = cond.bounds.diagonal();
  ad::Var<T> e_db, e_density;
  if (parts & (kOccupancy | (cfg.shared_double_mlp ? kDensity | kColor : 0))) {
    e_db = model.double_embed(gamma_x, fused);
  }
  if (cfg.shared_double_mlp) {
    e_density = e_db;
  } else if (parts & (kDensity | kColor)) {
    e_density = model.double_embed(gamma_x, fused, true);
  }
  if (cfg.shared_double_mlp && (parts & (kOccupancy | kDensity))) {
    const auto logits = model.geometry_logits(e_db);
    if (parts & kOccupancy) out.s = ad::sigmoid(ad::slice_cols(logits, 0, 1));
    if (parts & kDensity) out.sigma = ad::scale(ad::softplus(ad::slice_cols(logits, 1, 1)), 1.0 / diag);
  } else if (!cfg.shared_double_mlp) {
    if (parts & kOccupancy) out.s = ad::sigmoid(ad::slice_cols(model.geometry_logits(e_db), 0, 1));
    if (parts & kDensity) {
      out.sigma = ad::scale(ad::softplus(ad::slice_cols(model.geometry_logits(e_density, true), 1, 1)),
                            1.0 / diag);
    }
  }
  if (want_color) {
    if (cfg.fusion == FusionMode::Transformer) {
      const auto e_c = model.decoder(d_q, ad::concat_rows(dirs), e_density, ad::concat_rows(codes), n);
      out.color = model.texture_head(e_c);
    } else {
      out.color = model.texture_head(
          ad::concat_cols<T>({e_density, positional_encoding(d_q, cfg.dir_bands)}));
    }
  }
  return out;
}

template <class T>
std::vector<FieldOutput> evaluate_field(const DoubleField<T>& model, const MultiViewSample& sample,
                                        const std::vector<Vec3>& xs, const Vec3& d_q) {
  if (sample.views.empty()) throw ValidationError("evaluate_field: the sample has no views");
  ad::NoGradGuard guard;
  std::vector<int> ids(sample.views.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
  const auto cond = make_conditioning(model, sample, ids);
  std::vector<FieldOutput> out(xs.size());
  const std::size_t chunk = 4096;
  for (std::size_t start = 0; start < xs.size(); start += chunk) {
    const std::size_t m = std::min(chunk, xs.size() - start);
    ad::Matrix<T> x(m, 3), d(m, 3);
    for (std::size_t r = 0; r < m; ++r) {
      x.row(r) = xs[start + r].transpose().template cast<T>();
      d.row(r) = d_q.transpose().template cast<T>();
    }
    const auto f = evaluate(model, cond, ad::constant(std::move(x)), ad::constant(std::move(d)));
    for (std::size_t r = 0; r < m; ++r) {
      out[start + r].s = f.s.value()(r, 0);
      out[start + r].sigma = f.sigma.value()(r, 0);
      out[start + r].c = f.color.value().row(r).transpose().template cast<double>();
    }
  }
  return out;
}

#define DFIELD_MODEL_INSTANTIATE(T)                                                          \
  template class DoubleField<T>;                                                             \
  template Conditioning<T> make_conditioning(const DoubleField<T>&, const MultiViewSample&,  \
                                             const std::vector<int>&);                       \
  template FieldBatch<T> evaluate(const DoubleField<T>&, const Conditioning<T>&,             \
                                  const ad::Var<T>&, const ad::Var<T>&, int);                \
  template std::vector<FieldOutput> evaluate_field(const DoubleField<T>&,                    \
                                                   const MultiViewSample&,                   \
                                                   const std::vector<Vec3>&, const Vec3&);

DFIELD_MODEL_INSTANTIATE(float)
DFIELD_MODEL_INSTANTIATE(double)

}  // namespace dfield
