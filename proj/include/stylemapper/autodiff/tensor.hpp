#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace stylemapper::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until the first backward touches this node
  bool requires_grad = false;
  std::string op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward_fn;

  bool is_leaf() const { return parents.empty(); }

  std::vector<T>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    return grad;
  }
};

// Handle to a node of the recorded computation. Copies share the node.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const auto n = numel(shape);
    return from(std::vector<T>(n, T(0)), std::move(shape), requires_grad);
  }

  static Tensor full(Shape shape, T v, bool requires_grad = false) {
    const auto n = numel(shape);
    return from(std::vector<T>(n, v), std::move(shape), requires_grad);
  }

  static Tensor from(std::vector<T> values, Shape shape, bool requires_grad = false) {
    if (values.size() != numel(shape)) {
      throw ShapeError("tensor: " + std::to_string(values.size()) + " values for shape " + shape_str(shape));
    }
    for (auto d : shape) {
      if (d == 0) throw ShapeError("tensor: zero-sized dimension in " + shape_str(shape));
    }
    auto n = std::make_shared<Node<T>>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }

  const std::vector<T>& values() const { return node_->value; }
  std::vector<T>& mutable_values() { return node_->value; }
  const std::vector<T>& grad() const { return node_->grad; }
  std::vector<T>& mutable_grad() { return node_->ensure_grad(); }
  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }
  T item() const {
    if (size() != 1) throw ShapeError("item: tensor of shape " + shape_str(shape()) + " is not a scalar");
    return node_->value[0];
  }

  void zero_grad() { node_->grad.assign(node_->value.size(), T(0)); }

  // Same values, cut from the graph.
  Tensor detach() const { return from(node_->value, node_->shape, false); }

  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

// Builds an op node. The node requires grad when any parent does.
template <typename T>
Tensor<T> make_result(std::string op, Shape shape, std::vector<T> values, std::vector<Tensor<T>> parents,
                      std::function<void(Node<T>&)> backward_fn) {
  auto n = std::make_shared<Node<T>>();
  n->op = std::move(op);
  n->shape = std::move(shape);
  n->value = std::move(values);
  for (auto& p : parents) {
    n->requires_grad = n->requires_grad || p.requires_grad();
    n->parents.push_back(p.node_ptr());
  }
  if (n->requires_grad) n->backward_fn = std::move(backward_fn);
  return Tensor<T>(std::move(n));
}

// Nodes reachable from `root`, ordered so every node's inputs precede it.
template <typename T>
std::vector<Node<T>*> topological_order(const Tensor<T>& root) {
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{root.node(), 0}};
  seen.insert(root.node());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node<T>* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  return order;
}

// Reverse sweep from a scalar. Leaf grads accumulate across calls; intermediate grads
// are reset at the start of every sweep.
template <typename T>
void backward(const Tensor<T>& loss) {
  if (loss.size() != 1) throw ShapeError("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
  if (!loss.requires_grad()) return;
  const auto order = topological_order(loss);
  for (auto* n : order) {
    if (!n->is_leaf()) n->grad.assign(n->value.size(), T(0));
  }
  loss.node()->ensure_grad()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

}  // namespace stylemapper::ad
