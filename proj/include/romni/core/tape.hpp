#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "romni/core/tensor.hpp"

namespace romni {

/// Handle to a node on a Tape. Plain index; cheap to copy.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode autodiff tape. Every operation appends a node holding its
/// output value, a gradient buffer of the same shape, and a backward closure
/// that scatters the node's gradient into its parents. One tape per forward
/// pass; parameters enter as leaves each pass.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int)>;

  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    BackwardFn backward;
    bool needs_grad = false;
  };

  Var leaf(Tensor<T> value, bool needs_grad = false) {
    return push(std::move(value), needs_grad, nullptr);
  }

  Var push(Tensor<T> value, bool needs_grad, BackwardFn backward) {
    Node n;
    n.grad = Tensor<T>(value.shape());
    n.value = std::move(value);
    n.backward = std::move(backward);
    n.needs_grad = needs_grad;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  bool needs_grad(Var v) const { return nodes_[static_cast<size_t>(v.id)].needs_grad; }

  const Tensor<T>& val(Var v) const { return nodes_[static_cast<size_t>(v.id)].value; }
  Tensor<T>& val(Var v) { return nodes_[static_cast<size_t>(v.id)].value; }
  Tensor<T>& grad(Var v) { return nodes_[static_cast<size_t>(v.id)].grad; }
  const Tensor<T>& grad(Var v) const { return nodes_[static_cast<size_t>(v.id)].grad; }

  /// Backpropagate from a scalar root. Gradients accumulate; leaves keep
  /// theirs for the caller to read.
  void backward(Var root) {
    auto& r = nodes_[static_cast<size_t>(root.id)];
    if (r.value.numel() != 1) throw InputError("backward: root must be scalar");
    r.grad.fill(T(1));
    for (int i = root.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<size_t>(i)];
      if (n.needs_grad && n.backward) n.backward(*this, i);
    }
  }

  size_t size() const { return nodes_.size(); }

  /// True if any parent requires gradients.
  bool any_needs_grad(std::initializer_list<Var> parents) const {
    for (Var p : parents)
      if (p.valid() && needs_grad(p)) return true;
    return false;
  }

 private:
  std::vector<Node> nodes_;
};

template <typename T>
bool all_finite(const Tensor<T>& t) {
  for (int64_t i = 0; i < t.numel(); ++i)
    if (!std::isfinite(static_cast<double>(t[i]))) return false;
  return true;
}

}  // namespace romni
