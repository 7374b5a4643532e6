#pragma once

#include <random>

#include "dfield/core/nn.hpp"

namespace dfield {

// Token layout throughout: token j of batch item b is row j * batch + b.

// Scaled dot-product attention with `heads` heads followed by the output
// projection. q is (m*B) x D, k is (n*B) x D, v is (n*B) x Dv. The softmax
// weights ((m*H*B) x n) are written to `weights` when it is non-null.
template <class T>
ad::Var<T> multi_head_attention(const ad::Var<T>& q, const ad::Var<T>& k, const ad::Var<T>& v,
                                ad::Index batch, int heads, const Linear<T>* out_proj,
                                ad::Var<T>* weights = nullptr);

// Mean over the n tokens of each batch item: (n*B) x D -> B x D.
template <class T>
ad::Var<T> mean_over_tokens(const ad::Var<T>& x, ad::Index n, ad::Index batch);

template <class T>
struct ViewEncoder {
  Linear<T> qkv;  // Din -> 3D
  Linear<T> out;  // D -> D
  Linear<T> ffn1;
  Linear<T> ffn2;
  int heads = 4;
  int dim = 0;

  // Self-attention over the n view tokens, residual feed-forward per token,
  // mean pooling: (n*B) x Din -> B x D.
  ad::Var<T> operator()(const ad::Var<T>& tokens, ad::Index n, ad::Index batch) const;
};

template <class T>
ViewEncoder<T> make_view_encoder(ParameterSet<T>& ps, const std::string& group, int in_dim, int dim,
                                 int ffn, int heads, std::mt19937_64& rng);

// Mean of the tokens followed by one linear layer.
template <class T>
ad::Var<T> fuse_average_pooling(const Linear<T>& proj, const ad::Var<T>& tokens, ad::Index n,
                                ad::Index batch);

template <class T>
struct QueryDecoder {
  Linear<T> q;       // gamma(d_q) -> D
  Linear<T> k;       // gamma(d_i) -> D
  Linear<T> v_embed; // e_db -> D (shared by all tokens)
  Linear<T> v_pixel; // per-view pixel code -> D
  Linear<T> out;
  Linear<T> ffn1;
  Linear<T> ffn2;
  int heads = 4;
  int dir_bands = 4;

  // d_q: B x 3; dirs: (n*B) x 3 unit directions of the input views;
  // e_db: B x W; pixels: (n*B) x P encoded (or raw) pixel colors.
  ad::Var<T> operator()(const ad::Var<T>& d_q, const ad::Var<T>& dirs, const ad::Var<T>& e_db,
                        const ad::Var<T>& pixels, ad::Index n, ad::Var<T>* weights = nullptr) const;
};

template <class T>
QueryDecoder<T> make_query_decoder(ParameterSet<T>& ps, const std::string& group, int embed_dim,
                                   int pixel_dim, int dim, int ffn, int heads, int dir_bands,
                                   std::mt19937_64& rng);

}  // namespace dfield
