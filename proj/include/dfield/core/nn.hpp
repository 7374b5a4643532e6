#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "dfield/ad/ops.hpp"

namespace dfield {

template <class T>
struct Param {
  std::string name;
  std::string group;
  ad::Var<T> var;
};

// Ordered registry of learnable tensors. Names are unique; order is the
// construction order and defines the checkpoint layout.
template <class T>
class ParameterSet {
 public:
  ad::Var<T> add(const std::string& name, const std::string& group, ad::Matrix<T> value);

  const std::vector<Param<T>>& params() const { return params_; }
  std::vector<Param<T>>& params() { return params_; }
  const Param<T>* find(const std::string& name) const;
  std::size_t count() const;  // scalar parameters
  std::vector<ad::Var<T>> vars(const std::vector<std::string>& groups = {}) const;

  std::map<std::string, Eigen::MatrixXd> to_map() const;
  // Copies values by name; throws ValidationError on missing names or shape mismatch.
  void load(const std::map<std::string, Eigen::MatrixXd>& values);

 private:
  std::vector<Param<T>> params_;
};

// Hidden activation: softplus with a sharp knee (beta 100), a smooth ReLU with
// well-defined second derivatives.
template <class T>
ad::Var<T> hidden_act(const ad::Var<T>& x) {
  return ad::softplus(x, 100.0);
}

template <class T>
struct Linear {
  ad::Var<T> weight;  // in x out
  ad::Var<T> bias;    // 1 x out
  int in = 0;
  int out = 0;

  ad::Var<T> operator()(const ad::Var<T>& x) const { return ad::affine(x, weight, bias); }
};

// Gaussian init with std gain / sqrt(fan_in), zero bias.
template <class T>
Linear<T> make_linear(ParameterSet<T>& ps, const std::string& name, const std::string& group, int in,
                      int out, std::mt19937_64& rng, double gain = 1.4142135623730951);

// Plain MLP; every layer but the last is followed by hidden_act. When
// `skip_at` >= 0 a side input of `skip_width` columns is concatenated to the
// input of that layer.
template <class T>
struct Mlp {
  std::vector<Linear<T>> layers;
  int skip_at = -1;
  bool activate_last = false;

  ad::Var<T> operator()(const ad::Var<T>& x, const ad::Var<T>& skip = ad::Var<T>()) const;
};

struct MlpShape {
  std::vector<int> widths;  // input, hidden..., output
  bool activate_last = false;
  double last_gain = 1.4142135623730951;
  int skip_at = -1;
  int skip_width = 0;
};

template <class T>
Mlp<T> make_mlp(ParameterSet<T>& ps, const std::string& name, const std::string& group,
                const MlpShape& shape, std::mt19937_64& rng);

}  // namespace dfield
