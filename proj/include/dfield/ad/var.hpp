#pragma once

// Reverse-mode automatic differentiation over dense row-major matrices.
//
// Every value is a 2-D matrix; rows are batch items. Backward rules are
// written with the same differentiable ops, so gradients can themselves be
// differentiated (needed for losses on spatial gradients of the field).

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <vector>

namespace dfield::ad {

template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class T>
class Var;

// grad_out -> gradients for each input; entries may be left undefined when
// `wanted[k]` is false.
template <class T>
using BackwardFn =
    std::function<std::vector<Var<T>>(const Var<T>& grad_out, const std::vector<bool>& wanted)>;

template <class T>
struct Node {
  Matrix<T> value;
  bool requires_grad = false;
  std::vector<Var<T>> inputs;
  BackwardFn<T> backward;
};

bool grad_enabled();

// Scoped switch for graph recording.
class GradModeGuard {
 public:
  explicit GradModeGuard(bool enabled);
  ~GradModeGuard();
  GradModeGuard(const GradModeGuard&) = delete;
  GradModeGuard& operator=(const GradModeGuard&) = delete;

 private:
  bool previous_;
};

class NoGradGuard : public GradModeGuard {
 public:
  NoGradGuard() : GradModeGuard(false) {}
};

// Flushes subnormal floats to zero for the current thread while alive. The
// softplus knee produces many of them in backward passes, and subnormal
// arithmetic is an order of magnitude slower on x86.
class FlushDenormals {
 public:
  FlushDenormals();
  ~FlushDenormals();
  FlushDenormals(const FlushDenormals&) = delete;
  FlushDenormals& operator=(const FlushDenormals&) = delete;

 private:
  unsigned previous_ = 0;
};

template <class T>
class Var {
 public:
  Var() = default;
  explicit Var(Matrix<T> value, bool requires_grad = false)
      : node_(std::make_shared<Node<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  bool defined() const { return node_ != nullptr; }
  const Matrix<T>& value() const { return node_->value; }
  // Leaves only: optimizers write parameters in place.
  Matrix<T>& mutable_value() { return node_->value; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  Node<T>* node() const { return node_.get(); }
  T item() const { return node_->value(0, 0); }
  Var detach() const { return Var(node_->value); }

 private:
  std::shared_ptr<Node<T>> node_;
};

template <class T>
Var<T> constant(Matrix<T> value) {
  return Var<T>(std::move(value), false);
}

template <class T>
Var<T> parameter(Matrix<T> value) {
  return Var<T>(std::move(value), true);
}

// Builds an op result; the graph edge is recorded only when grad mode is on
// and some input requires a gradient.
template <class T>
Var<T> make_result(Matrix<T> value, std::vector<Var<T>> inputs, BackwardFn<T> backward) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  if (grad_enabled()) {
    for (const auto& in : inputs) {
      if (in.requires_grad()) {
        node->requires_grad = true;
        break;
      }
    }
  }
  if (node->requires_grad) {
    node->inputs = std::move(inputs);
    node->backward = std::move(backward);
  }
  return Var<T>(std::move(node));
}

// Gradients of `output` with respect to `inputs`. `output` must be 1x1 unless
// `grad_output` is given. With `create_graph` the returned gradients carry a
// graph and can be differentiated again. Unreached inputs get zeros.
template <class T>
std::vector<Var<T>> grad(const Var<T>& output, const std::vector<Var<T>>& inputs,
                         bool create_graph = false, const Var<T>& grad_output = Var<T>());

}  // namespace dfield::ad
