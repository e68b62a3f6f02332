#ifndef CSA_NN_TENSOR_HPP
#define CSA_NN_TENSOR_HPP

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "csa/errors.hpp"

namespace csa::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  // Empty until a backward pass or zero_grad() populates it.
  std::vector<double> grad;
  bool requires_grad = false;
  std::string op;
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into inputs that require grad.
  std::function<void(Node&)> backward;

  bool is_leaf() const { return !backward; }
};

}  // namespace detail

/// Dense double-precision array with an optional reverse-mode graph edge.
/// Copies are shallow handles onto the same storage, like the tensor handles
/// of most autodiff frameworks.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    std::vector<double> v(shape_size(shape), 0.0);
    return from(std::move(shape), std::move(v), requires_grad);
  }

  static Tensor full(Shape shape, double fill, bool requires_grad = false) {
    std::vector<double> v(shape_size(shape), fill);
    return from(std::move(shape), std::move(v), requires_grad);
  }

  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false) {
    if (values.size() != shape_size(shape)) {
      throw DimensionError("tensor of shape " + shape_string(shape) + " needs " +
                           std::to_string(shape_size(shape)) + " values, got " +
                           std::to_string(values.size()));
    }
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    node->op = "leaf";
    return Tensor(std::move(node));
  }

  static Tensor scalar(double v, bool requires_grad = false) {
    return from(Shape{}, std::vector<double>{v}, requires_grad);
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const {
    if (axis >= rank()) {
      throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                           shape_string(shape()));
    }
    return node_->shape[axis];
  }
  std::size_t size() const { return node_->value.size(); }
  bool is_scalar() const { return size() == 1 && rank() == 0; }

  std::span<const double> values() const { return node_->value; }
  std::span<double> values() { return node_->value; }
  double operator[](std::size_t i) const { return node_->value[i]; }

  double item() const {
    if (size() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape()));
    return node_->value[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> grad() { return node_->grad; }
  void zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }
  void clear_grad() { node_->grad.clear(); }

  const std::string& op() const { return node_->op; }

  /// Same values, no graph edge, never requires grad.
  Tensor detach() const { return from(shape(), node_->value, false); }

  /// Deep copy of values; keeps requires_grad but not the graph edge.
  Tensor clone() const { return from(shape(), node_->value, requires_grad()); }

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

namespace detail {
inline thread_local bool grad_enabled = true;
}  // namespace detail

/// Disables graph construction on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_enabled) { detail::grad_enabled = false; }
  ~NoGradGuard() { detail::grad_enabled = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Creates the output of a differentiable operation. `backward` is attached only
/// when at least one input participates in differentiation.
inline Tensor make_result(Shape shape, std::vector<double> values, std::string op,
                          const std::vector<Tensor>& inputs,
                          std::function<void(detail::Node&)> backward) {
  Tensor out = Tensor::from(std::move(shape), std::move(values), false);
  auto& node = *out.node();
  node.op = std::move(op);
  if (!detail::grad_enabled) return out;
  bool any = false;
  for (const auto& t : inputs) any = any || t.requires_grad();
  if (any) {
    node.requires_grad = true;
    for (const auto& t : inputs) node.inputs.push_back(t.node());
    node.backward = std::move(backward);
  }
  return out;
}

/// Reverse-mode pass from a scalar root. Leaf gradients accumulate across calls;
/// intermediate gradients are recomputed from zero on every call.
inline void backward(const Tensor& root) {
  if (!root.defined() || root.size() != 1) {
    throw ContractError("backward() requires a scalar root, got shape " +
                        (root.defined() ? shape_string(root.shape()) : std::string("<undefined>")));
  }
  if (!root.requires_grad()) return;

  // Iterative post-order DFS; inputs are visited in declaration order so the
  // accumulation order is a deterministic function of graph construction.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (detail::Node* n : order) {
    if (!n->is_leaf()) {
      n->grad.assign(n->value.size(), 0.0);
    } else if (n->grad.empty()) {
      n->grad.assign(n->value.size(), 0.0);
    }
  }
  root.node()->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (!(*it)->is_leaf()) (*it)->backward(**it);
  }
}

}  // namespace csa::nn

#endif  // CSA_NN_TENSOR_HPP
