#pragma once

#include <memory>
#include <vector>

#include "dfield/ad/var.hpp"

namespace dfield::ad {

using Index = Eigen::Index;
using IndexList = std::shared_ptr<const std::vector<int>>;

// Elementwise arithmetic (shapes must match).
template <class T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <class T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <class T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <class T> Var<T> neg(const Var<T>& a);
template <class T> Var<T> scale(const Var<T>& a, double c);
template <class T> Var<T> add_scalar(const Var<T>& a, double c);

// op(a) * op(b), op = transpose when the flag is set.
template <class T>
Var<T> matmul(const Var<T>& a, const Var<T>& b, bool transpose_a = false, bool transpose_b = false);

// x * w + bias (bias is 1 x cols) in one node.
template <class T>
Var<T> affine(const Var<T>& x, const Var<T>& w, const Var<T>& bias);

// Broadcasting: `row` is 1xC, `col` is Nx1.
template <class T> Var<T> add_row(const Var<T>& a, const Var<T>& row);
template <class T> Var<T> add_col(const Var<T>& a, const Var<T>& col);
template <class T> Var<T> mul_col(const Var<T>& a, const Var<T>& col);
template <class T> Var<T> broadcast_rows(const Var<T>& row, Index rows);
template <class T> Var<T> broadcast_cols(const Var<T>& col, Index cols);
template <class T> Var<T> broadcast_scalar(const Var<T>& s, Index rows, Index cols);

// Reductions.
template <class T> Var<T> sum_rows(const Var<T>& a);  // 1xC
template <class T> Var<T> sum_cols(const Var<T>& a);  // Nx1
template <class T> Var<T> sum(const Var<T>& a);       // 1x1
template <class T> Var<T> mean(const Var<T>& a);      // 1x1

// Pointwise nonlinearities.
template <class T> Var<T> sigmoid(const Var<T>& a);
// log(1 + exp(beta x)) / beta, evaluated stably.
template <class T> Var<T> softplus(const Var<T>& a, double beta = 1.0);
template <class T> Var<T> sin(const Var<T>& a);
template <class T> Var<T> cos(const Var<T>& a);
template <class T> Var<T> exp(const Var<T>& a);
template <class T> Var<T> abs(const Var<T>& a);
template <class T> Var<T> square(const Var<T>& a);
template <class T> Var<T> sqrt(const Var<T>& a);
template <class T> Var<T> reciprocal(const Var<T>& a);
// Gradient passes where lo <= a <= hi.
template <class T> Var<T> clamp(const Var<T>& a, double lo, double hi);

template <class T> Var<T> softmax_rows(const Var<T>& a);

// Layout.
template <class T> Var<T> concat_cols(const std::vector<Var<T>>& parts);
template <class T> Var<T> slice_cols(const Var<T>& a, Index start, Index count);
template <class T> Var<T> pad_cols(const Var<T>& a, Index start, Index total);
template <class T> Var<T> concat_rows(const std::vector<Var<T>>& parts);
template <class T> Var<T> slice_rows(const Var<T>& a, Index start, Index count);
template <class T> Var<T> pad_rows(const Var<T>& a, Index start, Index total);
template <class T> Var<T> reshape(const Var<T>& a, Index rows, Index cols);

// out[r] = a[idx[r]]; idx < 0 yields a zero row.
template <class T> Var<T> gather_rows(const Var<T>& a, IndexList idx);
// out[idx[r]] += a[r] for a result with `rows` rows; idx < 0 is skipped.
template <class T> Var<T> scatter_add_rows(const Var<T>& a, IndexList idx, Index rows);

// Exclusive prefix sum along each row; `reverse` sums from the right.
template <class T> Var<T> cumsum_exclusive(const Var<T>& a, bool reverse = false);

// Batched multi-head attention kernels. Tokens are stored view-major: token j
// of batch item b lives in row j*B + b. Weight matrices have one row per
// (query i, head h, item b) at (i*H + h)*B + b and one column per key.
struct AttentionShape {
  Index batch = 0;    // B
  Index queries = 0;  // m
  Index keys = 0;     // n
  Index heads = 0;    // H
};
// scores = scale * <q_h, k_h> per head.
template <class T>
Var<T> attention_scores(const Var<T>& q, const Var<T>& k, const AttentionShape& shape, double scale);
// out[i] = sum_j w[i, j] v[j] per head.
template <class T>
Var<T> attention_mix(const Var<T>& w, const Var<T>& v, const AttentionShape& shape);
// out[j] = sum_i w[i, j] x[i] per head (transpose of attention_mix).
template <class T>
Var<T> attention_mix_t(const Var<T>& w, const Var<T>& x, const AttentionShape& shape);

template <class T> Var<T> operator+(const Var<T>& a, const Var<T>& b) { return add(a, b); }
template <class T> Var<T> operator-(const Var<T>& a, const Var<T>& b) { return sub(a, b); }
template <class T> Var<T> operator-(const Var<T>& a) { return neg(a); }

inline IndexList make_index(std::vector<int> idx) {
  return std::make_shared<const std::vector<int>>(std::move(idx));
}

}  // namespace dfield::ad
