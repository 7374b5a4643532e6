#include "dfield/core/nn.hpp"

#include <cmath>

#include "dfield/errors.hpp"

namespace dfield {

template <class T>
ad::Var<T> ParameterSet<T>::add(const std::string& name, const std::string& group,
                                ad::Matrix<T> value) {
  if (find(name)) throw ValidationError("duplicate parameter name " + name);
  params_.push_back(Param<T>{name, group, ad::parameter(std::move(value))});
  return params_.back().var;
}

template <class T>
const Param<T>* ParameterSet<T>::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

template <class T>
std::size_t ParameterSet<T>::count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.var.value().size());
  return n;
}

template <class T>
std::vector<ad::Var<T>> ParameterSet<T>::vars(const std::vector<std::string>& groups) const {
  std::vector<ad::Var<T>> out;
  for (const auto& p : params_) {
    bool take = groups.empty();
    for (const auto& g : groups) take = take || g == p.group;
    if (take) out.push_back(p.var);
  }
  return out;
}

template <class T>
std::map<std::string, Eigen::MatrixXd> ParameterSet<T>::to_map() const {
  std::map<std::string, Eigen::MatrixXd> out;
  for (const auto& p : params_) out[p.name] = p.var.value().template cast<double>();
  return out;
}

template <class T>
void ParameterSet<T>::load(const std::map<std::string, Eigen::MatrixXd>& values) {
  for (auto& p : params_) {
    auto it = values.find(p.name);
    if (it == values.end()) throw ValidationError("missing parameter " + p.name);
    if (it->second.rows() != p.var.rows() || it->second.cols() != p.var.cols()) {
      throw ValidationError("shape mismatch for parameter " + p.name);
    }
    p.var.mutable_value() = it->second.template cast<T>();
  }
}

template <class T>
Linear<T> make_linear(ParameterSet<T>& ps, const std::string& name, const std::string& group,
                      int in, int out, std::mt19937_64& rng, double gain) {
  std::normal_distribution<double> n(0.0, gain / std::sqrt(static_cast<double>(in)));
  ad::Matrix<T> w(in, out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<T>(n(rng));
  Linear<T> l;
  l.weight = ps.add(name + ".weight", group, std::move(w));
  l.bias = ps.add(name + ".bias", group, ad::Matrix<T>::Zero(1, out));
  l.in = in;
  l.out = out;
  return l;
}

template <class T>
ad::Var<T> Mlp<T>::operator()(const ad::Var<T>& x, const ad::Var<T>& skip) const {
  ad::Var<T> h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (static_cast<int>(i) == skip_at) h = ad::concat_cols<T>({h, skip});
    h = layers[i](h);
    if (i + 1 < layers.size() || activate_last) h = hidden_act(h);
  }
  return h;
}

template <class T>
Mlp<T> make_mlp(ParameterSet<T>& ps, const std::string& name, const std::string& group,
                const MlpShape& shape, std::mt19937_64& rng) {
  const auto& widths = shape.widths;
  if (widths.size() < 2) throw ValidationError("an MLP needs at least one layer");
  Mlp<T> m;
  m.skip_at = shape.skip_at;
  m.activate_last = shape.activate_last;
  const std::size_t n = widths.size() - 1;
  for (std::size_t i = 0; i < n; ++i) {
    const int in = widths[i] + (static_cast<int>(i) == shape.skip_at ? shape.skip_width : 0);
    const double gain = (i + 1 == n && !shape.activate_last) ? shape.last_gain : 1.4142135623730951;
    m.layers.push_back(make_linear(ps, name + "." + std::to_string(i), group, in, widths[i + 1], rng, gain));
  }
  return m;
}

#define DFIELD_NN_INSTANTIATE(T)                                                                \
  template class ParameterSet<T>;                                                               \
  template struct Mlp<T>;                                                                       \
  template Linear<T> make_linear(ParameterSet<T>&, const std::string&, const std::string&, int, \
                                 int, std::mt19937_64&, double);                                \
  template Mlp<T> make_mlp(ParameterSet<T>&, const std::string&, const std::string&,            \
                           const MlpShape&, std::mt19937_64&);

DFIELD_NN_INSTANTIATE(float)
DFIELD_NN_INSTANTIATE(double)

}  // namespace dfield
