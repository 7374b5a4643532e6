#include "dfield/ad/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace dfield::ad {

namespace {

template <class T>
using Grads = std::vector<Var<T>>;

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("ad: ") + what);
}

template <class T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string("ad: shape mismatch in ") + op + " (" +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
  }
}

}  // namespace

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "add");
  return make_result<T>(a.value() + b.value(), {a, b},
                        [](const Var<T>& g, const std::vector<bool>&) { return Grads<T>{g, g}; });
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "sub");
  return make_result<T>(a.value() - b.value(), {a, b},
                        [](const Var<T>& g, const std::vector<bool>& w) {
                          return Grads<T>{g, w[1] ? neg(g) : Var<T>()};
                        });
}

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "mul");
  Matrix<T> v = a.value().cwiseProduct(b.value());
  return make_result<T>(std::move(v), {a, b}, [a, b](const Var<T>& g, const std::vector<bool>& w) {
    return Grads<T>{w[0] ? mul(g, b) : Var<T>(), w[1] ? mul(g, a) : Var<T>()};
  });
}

template <class T>
Var<T> neg(const Var<T>& a) {
  return make_result<T>(-a.value(), {a},
                        [](const Var<T>& g, const std::vector<bool>&) { return Grads<T>{neg(g)}; });
}

template <class T>
Var<T> scale(const Var<T>& a, double c) {
  return make_result<T>(a.value() * static_cast<T>(c), {a},
                        [c](const Var<T>& g, const std::vector<bool>&) {
                          return Grads<T>{scale(g, c)};
                        });
}

template <class T>
Var<T> add_scalar(const Var<T>& a, double c) {
  Matrix<T> v = a.value().array() + static_cast<T>(c);
  return make_result<T>(std::move(v), {a},
                        [](const Var<T>& g, const std::vector<bool>&) { return Grads<T>{g}; });
}

template <class T>
Var<T> matmul(const Var<T>& a, const Var<T>& b, bool ta, bool tb) {
  const Index inner_a = ta ? a.rows() : a.cols();
  const Index inner_b = tb ? b.cols() : b.rows();
  require(inner_a == inner_b, "matmul inner dimension mismatch");
  Matrix<T> out;
  if (!ta && !tb) out.noalias() = a.value() * b.value();
  else if (ta && !tb) out.noalias() = a.value().transpose() * b.value();
  else if (!ta && tb) out.noalias() = a.value() * b.value().transpose();
  else out.noalias() = a.value().transpose() * b.value().transpose();
  return make_result<T>(std::move(out), {a, b},
                        [a, b, ta, tb](const Var<T>& g, const std::vector<bool>& w) {
                          Var<T> da, db;
                          if (w[0]) da = ta ? matmul(b, g, tb, true) : matmul(g, b, false, !tb);
                          if (w[1]) db = tb ? matmul(g, a, true, ta) : matmul(a, g, !ta, false);
                          return Grads<T>{da, db};
                        });
}

template <class T>
Var<T> affine(const Var<T>& x, const Var<T>& w, const Var<T>& bias) {
  require(x.cols() == w.rows(), "affine inner dimension mismatch");
  require(bias.rows() == 1 && bias.cols() == w.cols(), "affine bias shape");
  Matrix<T> out;
  out.noalias() = x.value() * w.value();
  out.rowwise() += bias.value().row(0);
  return make_result<T>(std::move(out), {x, w, bias}, [x, w](const Var<T>& g, const std::vector<bool>& need) {
    Var<T> dx, dw, db;
    if (need[0]) dx = matmul(g, w, false, true);
    if (need[1]) dw = matmul(x, g, true, false);
    if (need[2]) db = sum_rows(g);
    return Grads<T>{dx, dw, db};
  });
}

template <class T>
Var<T> add_row(const Var<T>& a, const Var<T>& row) {
  require(row.rows() == 1 && row.cols() == a.cols(), "add_row shape");
  Matrix<T> v = a.value().rowwise() + row.value().row(0);
  return make_result<T>(std::move(v), {a, row}, [](const Var<T>& g, const std::vector<bool>& w) {
    return Grads<T>{g, w[1] ? sum_rows(g) : Var<T>()};
  });
}

template <class T>
Var<T> add_col(const Var<T>& a, const Var<T>& col) {
  require(col.cols() == 1 && col.rows() == a.rows(), "add_col shape");
  Matrix<T> v = a.value().colwise() + col.value().col(0);
  return make_result<T>(std::move(v), {a, col}, [](const Var<T>& g, const std::vector<bool>& w) {
    return Grads<T>{g, w[1] ? sum_cols(g) : Var<T>()};
  });
}

template <class T>
Var<T> mul_col(const Var<T>& a, const Var<T>& col) {
  require(col.cols() == 1 && col.rows() == a.rows(), "mul_col shape");
  Matrix<T> v = a.value().array().colwise() * col.value().col(0).array();
  return make_result<T>(std::move(v), {a, col},
                        [a, col](const Var<T>& g, const std::vector<bool>& w) {
                          return Grads<T>{w[0] ? mul_col(g, col) : Var<T>(),
                                          w[1] ? sum_cols(mul(g, a)) : Var<T>()};
                        });
}

template <class T>
Var<T> broadcast_rows(const Var<T>& row, Index rows) {
  require(row.rows() == 1, "broadcast_rows expects a row");
  Matrix<T> v = row.value().replicate(rows, 1);
  return make_result<T>(std::move(v), {row}, [](const Var<T>& g, const std::vector<bool>&) {
    return Grads<T>{sum_rows(g)};
  });
}

template <class T>
Var<T> broadcast_cols(const Var<T>& col, Index cols) {
  require(col.cols() == 1, "broadcast_cols expects a column");
  Matrix<T> v = col.value().replicate(1, cols);
  return make_result<T>(std::move(v), {col}, [](const Var<T>& g, const std::vector<bool>&) {
    return Grads<T>{sum_cols(g)};
  });
}

template <class T>
Var<T> broadcast_scalar(const Var<T>& s, Index rows, Index cols) {
  require(s.rows() == 1 && s.cols() == 1, "broadcast_scalar expects 1x1");
  Matrix<T> v = Matrix<T>::Constant(rows, cols, s.item());
  return make_result<T>(std::move(v), {s}, [](const Var<T>& g, const std::vector<bool>&) {
    return Grads<T>{sum(g)};
  });
}

template <class T>
Var<T> sum_rows(const Var<T>& a) {
  Matrix<T> v = a.value().colwise().sum();
  const Index rows = a.rows();
  return make_result<T>(std::move(v), {a}, [rows](const Var<T>& g, const std::vector<bool>&) {
    return Grads<T>{broadcast_rows(g, rows)};
  });
}

template <class T>
Var<T> sum_cols(const Var<T>& a) {
  Matrix<T> v = a.value().rowwise().sum();
  const Index cols = a.cols();
  return make_result<T>(std::move(v), {a}, [cols](const Var<T>& g, const std::vector<bool>&) {
    return Grads<T>{broadcast_cols(g, cols)};
  });
}

template <class T>
Var<T> sum(const Var<T>& a) {
  Matrix<T> v(1, 1);
  v(0, 0) = a.value().sum();
  const Index rows = a.rows();
  const Index cols = a.cols();
  return make_result<T>(std::move(v), {a}, [rows, cols](const Var<T>& g, const std::vector<bool>&) {
    return Grads<T>{broadcast_scalar(g, rows, cols)};
  });
}

template <class T>
Var<T> mean(const Var<T>& a) {
  require(a.rows() * a.cols() > 0, "mean of empty matrix");
  return scale(sum(a), 1.0 / static_cast<double>(a.rows() * a.cols()));
}

template <class T>
Var<T> sigmoid(const Var<T>& a) {
  Matrix<T> v = (T(1) + (-a.value().array()).exp()).inverse().matrix();
  return make_result<T>(std::move(v), {a}, [a](const Var<T>& g, const std::vector<bool>&) {
    if (!grad_enabled()) {
      const auto y = (T(1) + (-a.value().array()).exp()).inverse();
      return Grads<T>{constant(Matrix<T>((g.value().array() * y * (T(1) - y)).matrix()))};
    }
    Var<T> y = sigmoid(a);
    return Grads<T>{mul(g, mul(y, add_scalar(neg(y), 1.0)))};
  });
}

template <class T>
Var<T> softplus(const Var<T>& a, double beta) {
  const T b = static_cast<T>(beta);
  auto z = (a.value().array() * b);
  Matrix<T> v;
  // In single precision log(1 + e) differs from log1p(e) by at most one ulp
  // of 1, which is far below the resolution of the result.
  if constexpr (std::is_same_v<T, float>) v = ((z.max(T(0)) + (T(1) + (-z.abs()).exp()).log()) / b).matrix();
  else v = ((z.max(T(0)) + (-z.abs()).exp().log1p()) / b).matrix();
  return make_result<T>(std::move(v), {a}, [a, beta](const Var<T>& g, const std::vector<bool>&) {
    if (!grad_enabled()) {
      const auto y = (T(1) + (-(a.value().array() * static_cast<T>(beta))).exp()).inverse();
      return Grads<T>{constant(Matrix<T>((g.value().array() * y).matrix()))};
    }
    return Grads<T>{mul(g, sigmoid(scale(a, beta)))};
  });
}

template <class T>
Var<T> sin(const Var<T>& a) {
  Matrix<T> v = a.value().array().sin().matrix();
  return make_result<T>(std::move(v), {a}, [a](const Var<T>& g, const std::vector<bool>&) {
    return Grads<T>{mul(g, cos(a))};
  });
}

template <class T>
Var<T> cos(const Var<T>& a) {
  Matrix<T> v = a.value().array().cos().matrix();
  return make_result<T>(std::move(v), {a}, [a](const Var<T>& g, const std::vector<bool>&) {
    return Grads<T>{neg(mul(g, sin(a)))};
  });
}

template <class T>
Var<T> exp(const Var<T>& a) {
  Matrix<T> v = a.value().array().exp().matrix();
  return make_result<T>(std::move(v), {a}, [a](const Var<T>& g, const std::vector<bool>&) {
    return Grads<T>{mul(g, exp(a))};
  });
}

template <class T>
Var<T> abs(const Var<T>& a) {
  Matrix<T> v = a.value().cwiseAbs();
  return make_result<T>(std::move(v), {a}, [a](const Var<T>& g, const std::vector<bool>&) {
    Matrix<T> sign = a.value().unaryExpr([](T x) { return T((x > 0) - (x < 0)); });
    return Grads<T>{mul(g, constant(std::move(sign)))};
  });
}

template <class T>
Var<T> square(const Var<T>& a) {
  Matrix<T> v = a.value().array().square().matrix();
  return make_result<T>(std::move(v), {a}, [a](const Var<T>& g, const std::vector<bool>&) {
    return Grads<T>{scale(mul(g, a), 2.0)};
  });
}

template <class T>
Var<T> sqrt(const Var<T>& a) {
  Matrix<T> v = a.value().array().sqrt().matrix();
  return make_result<T>(std::move(v), {a}, [a](const Var<T>& g, const std::vector<bool>&) {
    return Grads<T>{mul(g, scale(reciprocal(sqrt(a)), 0.5))};
  });
}

template <class T>
Var<T> reciprocal(const Var<T>& a) {
  Matrix<T> v = a.value().array().inverse().matrix();
  return make_result<T>(std::move(v), {a}, [a](const Var<T>& g, const std::vector<bool>&) {
    return Grads<T>{neg(mul(g, square(reciprocal(a))))};
  });
}

template <class T>
Var<T> clamp(const Var<T>& a, double lo, double hi) {
  const T l = static_cast<T>(lo);
  const T h = static_cast<T>(hi);
  Matrix<T> v = a.value().array().max(l).min(h).matrix();
  return make_result<T>(std::move(v), {a}, [a, l, h](const Var<T>& g, const std::vector<bool>&) {
    Matrix<T> mask = a.value().unaryExpr([l, h](T x) { return T(x >= l && x <= h); });
    return Grads<T>{mul(g, constant(std::move(mask)))};
  });
}

template <class T>
Var<T> softmax_rows(const Var<T>& a) {
  Matrix<T> v = a.value();
  for (Index r = 0; r < v.rows(); ++r) {
    auto row = v.row(r);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
  return make_result<T>(std::move(v), {a}, [a](const Var<T>& g, const std::vector<bool>&) {
    Var<T> y = softmax_rows(a);
    return Grads<T>{mul(y, add_col(g, neg(sum_cols(mul(g, y)))))};
  });
}

template <class T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  require(!parts.empty(), "concat_cols of nothing");
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const auto& p : parts) {
    require(p.rows() == rows, "concat_cols row mismatch");
    cols += p.cols();
  }
  Matrix<T> v(rows, cols);
  std::vector<Index> offsets;
  Index off = 0;
  for (const auto& p : parts) {
    v.middleCols(off, p.cols()) = p.value();
    offsets.push_back(off);
    off += p.cols();
  }
  std::vector<Index> widths;
  for (const auto& p : parts) widths.push_back(p.cols());
  return make_result<T>(std::move(v), parts,
                        [offsets, widths](const Var<T>& g, const std::vector<bool>& w) {
                          Grads<T> out(offsets.size());
                          for (std::size_t k = 0; k < offsets.size(); ++k) {
                            if (w[k]) out[k] = slice_cols(g, offsets[k], widths[k]);
                          }
                          return out;
                        });
}

template <class T>
Var<T> slice_cols(const Var<T>& a, Index start, Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.cols(), "slice_cols range");
  Matrix<T> v = a.value().middleCols(start, count);
  const Index total = a.cols();
  return make_result<T>(std::move(v), {a},
                        [start, total](const Var<T>& g, const std::vector<bool>&) {
                          return Grads<T>{pad_cols(g, start, total)};
                        });
}

template <class T>
Var<T> pad_cols(const Var<T>& a, Index start, Index total) {
  require(start >= 0 && start + a.cols() <= total, "pad_cols range");
  Matrix<T> v = Matrix<T>::Zero(a.rows(), total);
  v.middleCols(start, a.cols()) = a.value();
  const Index count = a.cols();
  return make_result<T>(std::move(v), {a},
                        [start, count](const Var<T>& g, const std::vector<bool>&) {
                          return Grads<T>{slice_cols(g, start, count)};
                        });
}

template <class T>
Var<T> concat_rows(const std::vector<Var<T>>& parts) {
  require(!parts.empty(), "concat_rows of nothing");
  const Index cols = parts.front().cols();
  Index rows = 0;
  for (const auto& p : parts) {
    require(p.cols() == cols, "concat_rows column mismatch");
    rows += p.rows();
  }
  Matrix<T> v(rows, cols);
  std::vector<Index> offsets;
  std::vector<Index> heights;
  Index off = 0;
  for (const auto& p : parts) {
    v.middleRows(off, p.rows()) = p.value();
    offsets.push_back(off);
    heights.push_back(p.rows());
    off += p.rows();
  }
  return make_result<T>(std::move(v), parts,
                        [offsets, heights](const Var<T>& g, const std::vector<bool>& w) {
                          Grads<T> out(offsets.size());
                          for (std::size_t k = 0; k < offsets.size(); ++k) {
                            if (w[k]) out[k] = slice_rows(g, offsets[k], heights[k]);
                          }
                          return out;
                        });
}

template <class T>
Var<T> slice_rows(const Var<T>& a, Index start, Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.rows(), "slice_rows range");
  Matrix<T> v = a.value().middleRows(start, count);
  const Index total = a.rows();
  return make_result<T>(std::move(v), {a},
                        [start, total](const Var<T>& g, const std::vector<bool>&) {
                          return Grads<T>{pad_rows(g, start, total)};
                        });
}

template <class T>
Var<T> pad_rows(const Var<T>& a, Index start, Index total) {
  require(start >= 0 && start + a.rows() <= total, "pad_rows range");
  Matrix<T> v = Matrix<T>::Zero(total, a.cols());
  v.middleRows(start, a.rows()) = a.value();
  const Index count = a.rows();
  return make_result<T>(std::move(v), {a},
                        [start, count](const Var<T>& g, const std::vector<bool>&) {
                          return Grads<T>{slice_rows(g, start, count)};
                        });
}

template <class T>
Var<T> reshape(const Var<T>& a, Index rows, Index cols) {
  require(rows * cols == a.rows() * a.cols(), "reshape size mismatch");
  Matrix<T> v = Eigen::Map<const Matrix<T>>(a.value().data(), rows, cols);
  const Index r0 = a.rows();
  const Index c0 = a.cols();
  return make_result<T>(std::move(v), {a}, [r0, c0](const Var<T>& g, const std::vector<bool>&) {
    return Grads<T>{reshape(g, r0, c0)};
  });
}

template <class T>
Var<T> gather_rows(const Var<T>& a, IndexList idx) {
  const Index n = static_cast<Index>(idx->size());
  const Index cols = a.cols();
  Matrix<T> v(n, cols);
  const auto& src = a.value();
  for (Index r = 0; r < n; ++r) {
    const int i = (*idx)[r];
    if (i < 0) {
      v.row(r).setZero();
    } else {
      require(i < a.rows(), "gather_rows index out of range");
      v.row(r) = src.row(i);
    }
  }
  const Index rows = a.rows();
  return make_result<T>(std::move(v), {a}, [idx, rows](const Var<T>& g, const std::vector<bool>&) {
    return Grads<T>{scatter_add_rows(g, idx, rows)};
  });
}

template <class T>
Var<T> scatter_add_rows(const Var<T>& a, IndexList idx, Index rows) {
  require(static_cast<Index>(idx->size()) == a.rows(), "scatter_add_rows index count");
  Matrix<T> v = Matrix<T>::Zero(rows, a.cols());
  const auto& src = a.value();
  for (Index r = 0; r < a.rows(); ++r) {
    const int i = (*idx)[r];
    if (i < 0) continue;
    require(i < rows, "scatter_add_rows index out of range");
    v.row(i) += src.row(r);
  }
  return make_result<T>(std::move(v), {a}, [idx](const Var<T>& g, const std::vector<bool>&) {
    return Grads<T>{gather_rows(g, idx)};
  });
}

template <class T>
Var<T> cumsum_exclusive(const Var<T>& a, bool reverse) {
  Matrix<T> v(a.rows(), a.cols());
  const auto& src = a.value();
  for (Index r = 0; r < a.rows(); ++r) {
    T acc = 0;
    if (!reverse) {
      for (Index c = 0; c < a.cols(); ++c) {
        v(r, c) = acc;
        acc += src(r, c);
      }
    } else {
      for (Index c = a.cols() - 1; c >= 0; --c) {
        v(r, c) = acc;
        acc += src(r, c);
      }
    }
  }
  return make_result<T>(std::move(v), {a}, [reverse](const Var<T>& g, const std::vector<bool>&) {
    return Grads<T>{cumsum_exclusive(g, !reverse)};
  });
}

namespace {

void check_attention(const AttentionShape& s, Index weight_rows, Index weight_cols) {
  require(s.batch > 0 && s.queries > 0 && s.keys > 0 && s.heads > 0, "attention shape");
  require(weight_rows == s.queries * s.heads * s.batch && weight_cols == s.keys,
          "attention weight layout");
}

}  // namespace

template <class T>
Var<T> attention_scores(const Var<T>& q, const Var<T>& k, const AttentionShape& s, double scale_by) {
  require(s.batch > 0 && s.queries > 0 && s.keys > 0 && s.heads > 0, "attention shape");
  require(q.rows() == s.queries * s.batch && k.rows() == s.keys * s.batch, "attention rows");
  require(q.cols() == k.cols() && q.cols() % s.heads == 0, "attention head split");
  const Index B = s.batch, H = s.heads, m = s.queries, n = s.keys;
  const Index dh = q.cols() / H;
  const T sc = static_cast<T>(scale_by);
  Matrix<T> out(m * H * B, n);
  const auto& Q = q.value();
  const auto& K = k.value();
  for (Index i = 0; i < m; ++i) {
    for (Index h = 0; h < H; ++h) {
      for (Index b = 0; b < B; ++b) {
        const T* qp = Q.data() + (i * B + b) * Q.cols() + h * dh;
        T* op = out.data() + ((i * H + h) * B + b) * n;
        for (Index j = 0; j < n; ++j) {
          const T* kp = K.data() + (j * B + b) * K.cols() + h * dh;
          T acc = 0;
          for (Index c = 0; c < dh; ++c) acc += qp[c] * kp[c];
          op[j] = sc * acc;
        }
      }
    }
  }
  return make_result<T>(std::move(out), {q, k},
                        [q, k, s, scale_by](const Var<T>& g, const std::vector<bool>& w) {
                          Var<T> dq, dk;
                          if (w[0]) dq = scale(attention_mix(g, k, s), scale_by);
                          if (w[1]) dk = scale(attention_mix_t(g, q, s), scale_by);
                          return Grads<T>{dq, dk};
                        });
}

template <class T>
Var<T> attention_mix(const Var<T>& wts, const Var<T>& v, const AttentionShape& s) {
  check_attention(s, wts.rows(), wts.cols());
  require(v.rows() == s.keys * s.batch && v.cols() % s.heads == 0, "attention_mix values");
  const Index B = s.batch, H = s.heads, m = s.queries, n = s.keys;
  const Index D = v.cols();
  const Index dv = D / H;
  Matrix<T> out = Matrix<T>::Zero(m * B, D);
  const auto& W = wts.value();
  const auto& V = v.value();
  for (Index i = 0; i < m; ++i) {
    for (Index h = 0; h < H; ++h) {
      for (Index b = 0; b < B; ++b) {
        const T* wp = W.data() + ((i * H + h) * B + b) * n;
        T* op = out.data() + (i * B + b) * D + h * dv;
        for (Index j = 0; j < n; ++j) {
          const T* vp = V.data() + (j * B + b) * D + h * dv;
          const T wj = wp[j];
          for (Index c = 0; c < dv; ++c) op[c] += wj * vp[c];
        }
      }
    }
  }
  return make_result<T>(std::move(out), {wts, v},
                        [wts, v, s](const Var<T>& g, const std::vector<bool>& w) {
                          Var<T> dw, dv_;
                          if (w[0]) dw = attention_scores(g, v, s, 1.0);
                          if (w[1]) dv_ = attention_mix_t(wts, g, s);
                          return Grads<T>{dw, dv_};
                        });
}

template <class T>
Var<T> attention_mix_t(const Var<T>& wts, const Var<T>& x, const AttentionShape& s) {
  check_attention(s, wts.rows(), wts.cols());
  require(x.rows() == s.queries * s.batch && x.cols() % s.heads == 0, "attention_mix_t input");
  const Index B = s.batch, H = s.heads, m = s.queries, n = s.keys;
  const Index D = x.cols();
  const Index dv = D / H;
  Matrix<T> out = Matrix<T>::Zero(n * B, D);
  const auto& W = wts.value();
  const auto& X = x.value();
  for (Index i = 0; i < m; ++i) {
    for (Index h = 0; h < H; ++h) {
      for (Index b = 0; b < B; ++b) {
        const T* wp = W.data() + ((i * H + h) * B + b) * n;
        const T* xp = X.data() + (i * B + b) * D + h * dv;
        for (Index j = 0; j < n; ++j) {
          T* op = out.data() + (j * B + b) * D + h * dv;
          const T wj = wp[j];
          for (Index c = 0; c < dv; ++c) op[c] += wj * xp[c];
        }
      }
    }
  }
  return make_result<T>(std::move(out), {wts, x},
                        [wts, x, s](const Var<T>& g, const std::vector<bool>& w) {
                          Var<T> dw, dx;
                          if (w[0]) dw = attention_scores(x, g, s, 1.0);
                          if (w[1]) dx = attention_mix(wts, g, s);
                          return Grads<T>{dw, dx};
                        });
}

#define DFIELD_AD_INSTANTIATE(T)                                                         \
  template Var<T> add(const Var<T>&, const Var<T>&);                                     \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                     \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                     \
  template Var<T> neg(const Var<T>&);                                                    \
  template Var<T> scale(const Var<T>&, double);                                          \
  template Var<T> add_scalar(const Var<T>&, double);                                     \
  template Var<T> matmul(const Var<T>&, const Var<T>&, bool, bool);                      \
  template Var<T> affine(const Var<T>&, const Var<T>&, const Var<T>&);                    \
  template Var<T> add_row(const Var<T>&, const Var<T>&);                                 \
  template Var<T> add_col(const Var<T>&, const Var<T>&);                                 \
  template Var<T> mul_col(const Var<T>&, const Var<T>&);                                 \
  template Var<T> broadcast_rows(const Var<T>&, Index);                                  \
  template Var<T> broadcast_cols(const Var<T>&, Index);                                  \
  template Var<T> broadcast_scalar(const Var<T>&, Index, Index);                         \
  template Var<T> sum_rows(const Var<T>&);                                               \
  template Var<T> sum_cols(const Var<T>&);                                               \
  template Var<T> sum(const Var<T>&);                                                    \
  template Var<T> mean(const Var<T>&);                                                   \
  template Var<T> sigmoid(const Var<T>&);                                                \
  template Var<T> softplus(const Var<T>&, double);                                       \
  template Var<T> sin(const Var<T>&);                                                    \
  template Var<T> cos(const Var<T>&);                                                    \
  template Var<T> exp(const Var<T>&);                                                    \
  template Var<T> abs(const Var<T>&);                                                    \
  template Var<T> square(const Var<T>&);                                                 \
  template Var<T> sqrt(const Var<T>&);                                                   \
  template Var<T> reciprocal(const Var<T>&);                                             \
  template Var<T> clamp(const Var<T>&, double, double);                                  \
  template Var<T> softmax_rows(const Var<T>&);                                           \
  template Var<T> concat_cols(const std::vector<Var<T>>&);                               \
  template Var<T> slice_cols(const Var<T>&, Index, Index);                               \
  template Var<T> pad_cols(const Var<T>&, Index, Index);                                 \
  template Var<T> concat_rows(const std::vector<Var<T>>&);                               \
  template Var<T> slice_rows(const Var<T>&, Index, Index);                               \
  template Var<T> pad_rows(const Var<T>&, Index, Index);                                 \
  template Var<T> reshape(const Var<T>&, Index, Index);                                  \
  template Var<T> gather_rows(const Var<T>&, IndexList);                                 \
  template Var<T> scatter_add_rows(const Var<T>&, IndexList, Index);                     \
  template Var<T> cumsum_exclusive(const Var<T>&, bool);                                 \
  template Var<T> attention_scores(const Var<T>&, const Var<T>&, const AttentionShape&,  \
                                   double);                                              \
  template Var<T> attention_mix(const Var<T>&, const Var<T>&, const AttentionShape&);    \
  template Var<T> attention_mix_t(const Var<T>&, const Var<T>&, const AttentionShape&);

DFIELD_AD_INSTANTIATE(float)
DFIELD_AD_INSTANTIATE(double)

#undef DFIELD_AD_INSTANTIATE

}  // namespace dfield::ad
