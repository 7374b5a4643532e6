#include "dfield/ad/var.hpp"

#include <stdexcept>
#include <unordered_map>
#include <utility>

#include "dfield/ad/ops.hpp"

#if defined(__SSE__)
#include <xmmintrin.h>
#endif

namespace dfield::ad {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

bool grad_enabled() { return g_grad_enabled; }

GradModeGuard::GradModeGuard(bool enabled) : previous_(g_grad_enabled) {
  g_grad_enabled = enabled;
}

GradModeGuard::~GradModeGuard() { g_grad_enabled = previous_; }

#if defined(__SSE__)
// FTZ (bit 15) and DAZ (bit 6) of MXCSR.
FlushDenormals::FlushDenormals() : previous_(_mm_getcsr()) { _mm_setcsr(previous_ | 0x8040u); }
FlushDenormals::~FlushDenormals() { _mm_setcsr(previous_); }
#else
FlushDenormals::FlushDenormals() = default;
FlushDenormals::~FlushDenormals() = default;
#endif

template <class T>
std::vector<Var<T>> grad(const Var<T>& output, const std::vector<Var<T>>& inputs,
                         bool create_graph, const Var<T>& grad_output) {
  using NodePtr = Node<T>*;
  FlushDenormals ftz;
  std::vector<Var<T>> result(inputs.size());
  auto zeros_for = [&](std::size_t k) {
    return Var<T>(Matrix<T>::Zero(inputs[k].rows(), inputs[k].cols()));
  };

  if (!output.defined()) throw std::invalid_argument("grad: undefined output");
  if (!grad_output.defined() && (output.rows() != 1 || output.cols() != 1)) {
    throw std::invalid_argument("grad: non-scalar output needs grad_output");
  }
  if (grad_output.defined() &&
      (grad_output.rows() != output.rows() || grad_output.cols() != output.cols())) {
    throw std::invalid_argument("grad: grad_output shape mismatch");
  }
  if (!output.requires_grad()) {
    for (std::size_t k = 0; k < inputs.size(); ++k) result[k] = zeros_for(k);
    return result;
  }

  std::unordered_map<NodePtr, bool> is_target;
  for (const auto& in : inputs) {
    if (in.defined()) is_target[in.node()] = true;
  }

  // Post-order over the recorded graph; `needed` marks nodes with a target
  // among their ancestors.
  std::vector<NodePtr> order;
  std::unordered_map<NodePtr, bool> needed;
  std::vector<std::pair<NodePtr, std::size_t>> stack;
  stack.emplace_back(output.node(), 0);
  needed.emplace(output.node(), false);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      NodePtr child = node->inputs[next++].node();
      if (child != nullptr && child->requires_grad && needed.find(child) == needed.end()) {
        needed.emplace(child, false);
        stack.emplace_back(child, 0);
      }
      continue;
    }
    bool need = is_target.count(node) > 0;
    for (const auto& in : node->inputs) {
      if (in.defined() && in.requires_grad() && needed[in.node()]) {
        need = true;
        break;
      }
    }
    needed[node] = need;
    order.push_back(node);
    stack.pop_back();
  }

  std::unordered_map<NodePtr, Var<T>> grads;
  grads[output.node()] = grad_output.defined()
                             ? grad_output
                             : Var<T>(Matrix<T>::Ones(1, 1));

  GradModeGuard mode(create_graph);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    NodePtr node = *it;
    if (!needed[node] || !node->backward) continue;
    auto found = grads.find(node);
    if (found == grads.end()) continue;
    const Var<T> g = found->second;
    if (!is_target.count(node)) grads.erase(found);

    std::vector<bool> wanted(node->inputs.size(), false);
    bool any = false;
    for (std::size_t k = 0; k < node->inputs.size(); ++k) {
      const auto& in = node->inputs[k];
      wanted[k] = in.defined() && in.requires_grad() && needed[in.node()];
      any = any || wanted[k];
    }
    if (!any) continue;

    std::vector<Var<T>> input_grads = node->backward(g, wanted);
    for (std::size_t k = 0; k < node->inputs.size(); ++k) {
      if (!wanted[k] || !input_grads[k].defined()) continue;
      NodePtr target = node->inputs[k].node();
      auto slot = grads.find(target);
      if (slot == grads.end()) {
        grads.emplace(target, input_grads[k]);
      } else {
        slot->second = add(slot->second, input_grads[k]);
      }
    }
  }

  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto found = inputs[k].defined() ? grads.find(inputs[k].node()) : grads.end();
    result[k] = found != grads.end() ? found->second : zeros_for(k);
  }
  return result;
}

template std::vector<Var<float>> grad(const Var<float>&, const std::vector<Var<float>>&, bool,
                                      const Var<float>&);
template std::vector<Var<double>> grad(const Var<double>&, const std::vector<Var<double>>&, bool,
                                       const Var<double>&);

}  // namespace dfield::ad
