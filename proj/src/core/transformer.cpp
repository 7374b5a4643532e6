#include "dfield/core/transformer.hpp"

#include <cmath>

#include "dfield/errors.hpp"
#include "dfield/features/encoding.hpp"

namespace dfield {

template <class T>
ad::Var<T> multi_head_attention(const ad::Var<T>& q, const ad::Var<T>& k, const ad::Var<T>& v,
                                ad::Index batch, int heads, const Linear<T>* out_proj,
                                ad::Var<T>* weights) {
  if (batch <= 0 || k.rows() == 0) throw ValidationError("attention needs at least one key");
  if (q.cols() != k.cols() || q.cols() % heads != 0 || v.cols() % heads != 0 ||
      k.rows() != v.rows() || q.rows() % batch != 0 || k.rows() % batch != 0) {
    throw ValidationError("attention shapes are inconsistent with the head count");
  }
  const ad::AttentionShape shape{batch, q.rows() / batch, k.rows() / batch, heads};
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols() / heads));
  const auto w = ad::softmax_rows(ad::attention_scores(q, k, shape, scale));
  if (weights) *weights = w;
  const auto mixed = ad::attention_mix(w, v, shape);
  return out_proj ? (*out_proj)(mixed) : mixed;
}

template <class T>
ad::Var<T> mean_over_tokens(const ad::Var<T>& x, ad::Index n, ad::Index batch) {
  const auto summed = ad::sum_rows(ad::reshape(x, n, batch * x.cols()));
  return ad::scale(ad::reshape(summed, batch, x.cols()), 1.0 / static_cast<double>(n));
}

template <class T>
ad::Var<T> ViewEncoder<T>::operator()(const ad::Var<T>& tokens, ad::Index n, ad::Index batch) const {
  const auto qkv_all = qkv(tokens);
  const auto a = multi_head_attention(ad::slice_cols(qkv_all, 0, dim), ad::slice_cols(qkv_all, dim, dim),
                                      ad::slice_cols(qkv_all, 2 * dim, dim), batch, heads, &out);
  const auto h = hidden_act(ffn1(a));
  // The last feed-forward layer is affine, so it commutes with the mean.
  return ad::add(mean_over_tokens(a, n, batch), ffn2(mean_over_tokens(h, n, batch)));
}

template <class T>
ViewEncoder<T> make_view_encoder(ParameterSet<T>& ps, const std::string& group, int in_dim, int dim,
                                 int ffn, int heads, std::mt19937_64& rng) {
  if (dim % heads != 0) throw ValidationError("model dimension must be divisible by the head count");
  ViewEncoder<T> e;
  e.qkv = make_linear(ps, group + ".qkv", group, in_dim, 3 * dim, rng, 1.0);
  e.out = make_linear(ps, group + ".out", group, dim, dim, rng, 1.0);
  e.ffn1 = make_linear(ps, group + ".ffn1", group, dim, ffn, rng);
  e.ffn2 = make_linear(ps, group + ".ffn2", group, ffn, dim, rng, 0.5);
  e.heads = heads;
  e.dim = dim;
  return e;
}

template <class T>
ad::Var<T> fuse_average_pooling(const Linear<T>& proj, const ad::Var<T>& tokens, ad::Index n,
                                ad::Index batch) {
  return proj(mean_over_tokens(tokens, n, batch));
}

template <class T>
ad::Var<T> QueryDecoder<T>::operator()(const ad::Var<T>& d_q, const ad::Var<T>& dirs,
                                       const ad::Var<T>& e_db, const ad::Var<T>& pixels,
                                       ad::Index n, ad::Var<T>* weights) const {
  const ad::Index batch = d_q.rows();
  const auto query = q(positional_encoding(d_q, dir_bands));
  const auto keys = k(positional_encoding(dirs, dir_bands));
  const auto shared = v_embed(e_db);
  std::vector<ad::Var<T>> reps(static_cast<std::size_t>(n), shared);
  const auto values = ad::add(ad::concat_rows(reps), v_pixel(pixels));
  const auto e = multi_head_attention(query, keys, values, batch, heads, &out, weights);
  return ad::add(e, ffn2(hidden_act(ffn1(e))));
}

template <class T>
QueryDecoder<T> make_query_decoder(ParameterSet<T>& ps, const std::string& group, int embed_dim,
                                   int pixel_dim, int dim, int ffn, int heads, int dir_bands,
                                   std::mt19937_64& rng) {
  if (dim % heads != 0) throw ValidationError("model dimension must be divisible by the head count");
  const int dir_dim = 6 * dir_bands;
  QueryDecoder<T> d;
  d.q = make_linear(ps, group + ".q", group, dir_dim, dim, rng, 1.0);
  d.k = make_linear(ps, group + ".k", group, dir_dim, dim, rng, 1.0);
  d.v_embed = make_linear(ps, group + ".v_embed", group, embed_dim, dim, rng, 1.0);
  d.v_pixel = make_linear(ps, group + ".v_pixel", group, pixel_dim, dim, rng, 1.0);
  d.out = make_linear(ps, group + ".out", group, dim, dim, rng, 1.0);
  d.ffn1 = make_linear(ps, group + ".ffn1", group, dim, ffn, rng);
  d.ffn2 = make_linear(ps, group + ".ffn2", group, ffn, dim, rng, 0.5);
  d.heads = heads;
  d.dir_bands = dir_bands;
  return d;
}

#define DFIELD_TRANSFORMER_INSTANTIATE(T)                                                        \
  template ad::Var<T> multi_head_attention(const ad::Var<T>&, const ad::Var<T>&,                 \
                                           const ad::Var<T>&, ad::Index, int, const Linear<T>*,  \
                                           ad::Var<T>*);                                         \
  template ad::Var<T> mean_over_tokens(const ad::Var<T>&, ad::Index, ad::Index);                 \
  template struct ViewEncoder<T>;                                                                \
  template ViewEncoder<T> make_view_encoder(ParameterSet<T>&, const std::string&, int, int, int, \
                                            int, std::mt19937_64&);                              \
  template ad::Var<T> fuse_average_pooling(const Linear<T>&, const ad::Var<T>&, ad::Index,       \
                                           ad::Index);                                           \
  template struct QueryDecoder<T>;                                                               \
  template QueryDecoder<T> make_query_decoder(ParameterSet<T>&, const std::string&, int, int,    \
                                              int, int, int, int, std::mt19937_64&);

DFIELD_TRANSFORMER_INSTANTIATE(float)
DFIELD_TRANSFORMER_INSTANTIATE(double)

}  // namespace dfield
