#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ignet/tensor.hpp"

namespace ignet {

template <class T>
struct Node;

// Handle to a node of the recorded computation graph.
template <class T>
using Value = std::shared_ptr<Node<T>>;

// Thread-local switch: with gradients disabled, ops keep neither inputs nor
// backward closures, so intermediates are freed as soon as the caller drops
// them (inference on full-size images relies on this).
inline bool& grad_enabled_flag() {
  thread_local bool enabled = true;
  return enabled;
}
inline bool grad_enabled() { return grad_enabled_flag(); }

struct NoGradGuard {
  NoGradGuard() : prev_(grad_enabled_flag()) { grad_enabled_flag() = false; }
  ~NoGradGuard() { grad_enabled_flag() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

template <class T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // allocated lazily by backward()
  std::vector<Value<T>> inputs;
  // Distributes this node's grad into its inputs' grads (accumulating).
  std::function<void(Node<T>&)> backward_fn;
  bool requires_grad = false;
  std::string name;  // non-empty for named parameters only

  void ensure_grad() {
    if (grad.numel() != value.numel()) grad = Tensor<T>(value.shape());
  }
  void zero_grad() {
    ensure_grad();
    for (index_t i = 0; i < grad.numel(); ++i) grad[i] = T(0);
  }
};

template <class T>
Value<T> make_leaf(Tensor<T> v, bool requires_grad = false, std::string name = {}) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(v);
  n->requires_grad = requires_grad;
  n->name = std::move(name);
  return n;
}

template <class T>
Value<T> constant(Tensor<T> v) {
  return make_leaf(std::move(v), false);
}

// Builds an interior node. When gradients are globally disabled or no input
// needs them, the node is detached (no inputs, no closure).
template <class T>
Value<T> make_op(Tensor<T> out, std::vector<Value<T>> inputs,
                 std::function<void(Node<T>&)> backward_fn) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(out);
  bool need = false;
  if (grad_enabled())
    for (const auto& in : inputs)
      if (in->requires_grad) need = true;
  if (need) {
    n->requires_grad = true;
    n->inputs = std::move(inputs);
    n->backward_fn = std::move(backward_fn);
  }
  return n;
}

// Named gradients of one backward pass plus the loss value it came from.
template <class T>
struct GradientRecord {
  std::map<std::string, Tensor<T>> grads;
  T loss = T(0);

  const Tensor<T>& at(const std::string& name) const {
    auto it = grads.find(name);
    if (it == grads.end()) throw ValueError("GradientRecord: no gradient named '" + name + "'");
    return it->second;
  }
};

namespace detail {

// Iterative post-order DFS over the recorded graph. Input order is fixed at
// graph construction, so the resulting schedule (and therefore all gradient
// accumulation order) is deterministic.
template <class T>
std::vector<Node<T>*> topo_order(Node<T>* root) {
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node<T>* child = node->inputs[next++].get();
      if (child->requires_grad && !visited.count(child)) {
        visited.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

}  // namespace detail

// Reverse-mode accumulation from a scalar loss into every named parameter
// in `params`. Parameters that never entered the recorded computation get
// an exactly-zero gradient of their shape.
template <class T>
GradientRecord<T> backward(const Value<T>& loss, const std::vector<Value<T>>& params) {
  if (!loss) throw ValueError("backward: null loss");
  if (loss->value.numel() != 1)
    throw ValueError("backward: loss must be scalar, got shape " +
                     shape_str(loss->value.shape()));
  GradientRecord<T> record;
  record.loss = loss->value[0];

  std::vector<Node<T>*> order = detail::topo_order(loss.get());
  for (Node<T>* n : order) n->zero_grad();
  loss->grad[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }

  std::unordered_set<const Node<T>*> reached(order.begin(), order.end());
  for (const auto& p : params) {
    if (p->name.empty()) throw ValueError("backward: parameter without a name");
    if (reached.count(p.get()))
      record.grads.emplace(p->name, p->grad);
    else
      record.grads.emplace(p->name, Tensor<T>(p->value.shape()));
  }
  return record;
}

}  // namespace ignet
