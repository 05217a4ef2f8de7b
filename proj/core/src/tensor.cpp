#include "lesioncascade/tensor.hpp"

#include <cmath>
#include <unordered_set>
#include <utility>

namespace lc {

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (std::int64_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  for (std::int64_t d : shape) {
    if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
  }
  auto node = std::make_shared<TensorNode>();
  node->values.assign(static_cast<std::size_t>(shape_numel(shape)), value);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values, bool requires_grad) {
  for (std::int64_t d : shape) {
    if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
  }
  if (shape_numel(shape) != static_cast<std::int64_t>(values.size())) {
    throw ShapeError("value count " + std::to_string(values.size()) +
                     " does not match shape " + shape_str(shape));
  }
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_values({}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
  detail::require_defined(*this, "shape");
  return node->shape;
}

int Tensor::rank() const { return static_cast<int>(shape().size()); }

std::int64_t Tensor::numel() const {
  detail::require_defined(*this, "numel");
  return node->numel();
}

std::int64_t Tensor::dim(int axis) const {
  const Shape& s = shape();
  const int r = static_cast<int>(s.size());
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(s));
  }
  return s[static_cast<std::size_t>(axis)];
}

bool Tensor::requires_grad() const {
  detail::require_defined(*this, "requires_grad");
  return node->requires_grad;
}

std::vector<double>& Tensor::values() {
  detail::require_defined(*this, "values");
  return node->values;
}

const std::vector<double>& Tensor::values() const {
  detail::require_defined(*this, "values");
  return node->values;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("item() requires a single-element tensor, got shape " + shape_str(shape()));
  }
  return node->values[0];
}

double Tensor::at(std::initializer_list<std::int64_t> index) const {
  const Shape& s = shape();
  if (index.size() != s.size()) {
    throw ShapeError("index rank " + std::to_string(index.size()) +
                     " does not match shape " + shape_str(s));
  }
  std::int64_t flat = 0;
  std::size_t i = 0;
  for (std::int64_t idx : index) {
    if (idx < 0 || idx >= s[i]) {
      throw ShapeError("index " + std::to_string(idx) + " out of range for axis " +
                       std::to_string(i) + " of shape " + shape_str(s));
    }
    flat = flat * s[i] + idx;
    ++i;
  }
  return node->values[static_cast<std::size_t>(flat)];
}

bool Tensor::has_grad() const { return defined() && !node->grad.empty(); }

const std::vector<double>& Tensor::grad() const {
  detail::require_defined(*this, "grad");
  if (node->grad.empty()) {
    throw std::logic_error("gradient requested before any backward pass reached this tensor");
  }
  return node->grad;
}

void Tensor::zero_grad() {
  detail::require_defined(*this, "zero_grad");
  node->grad.assign(node->values.size(), 0.0);
}

bool Tensor::all_finite() const {
  detail::require_defined(*this, "all_finite");
  for (double v : node->values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::backward(double seed) const { lc::backward(*this, seed); }

Tape Tape::build(TensorNode* root) {
  Tape tape;
  if (root == nullptr || !root->requires_grad) return tape;
  // Iterative post-order DFS; a node is appended after all of its parents.
  std::unordered_set<TensorNode*> visited;
  std::vector<std::pair<TensorNode*, std::size_t>> stack;
  visited.insert(root);
  stack.emplace_back(root, 0);
  while (!stack.empty()) {
    auto& [node, next_parent] = stack.back();
    if (next_parent < node->parents.size()) {
      TensorNode* parent = node->parents[next_parent++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      tape.order.push_back(node);
      stack.pop_back();
    }
  }
  return tape;
}

void backward(const Tensor& root, double seed) {
  detail::require_defined(root, "backward");
  if (root.numel() != 1) {
    throw ShapeError("backward() requires a single-element tensor, got shape " +
                     shape_str(root.shape()));
  }
  if (!root.node->requires_grad) return;

  Tape tape = Tape::build(root.node.get());
  for (TensorNode* node : tape.order) {
    if (node->leaf) {
      // Leaf gradients persist so that per-sample backward passes accumulate
      // into parameters until the optimizer consumes them.
      if (node->grad.empty()) node->grad.assign(node->values.size(), 0.0);
    } else {
      node->grad.assign(node->values.size(), 0.0);
    }
  }
  root.node->grad[0] += seed;
  for (auto it = tape.order.rbegin(); it != tape.order.rend(); ++it) {
    TensorNode* node = *it;
    if (node->backward_fn) node->backward_fn(*node);
  }
}

namespace {
thread_local bool g_grad_enabled = true;
}

bool GradMode::enabled() { return g_grad_enabled; }
void GradMode::set_enabled(bool on) { g_grad_enabled = on; }

namespace detail {

std::shared_ptr<TensorNode> make_op_node(
    Shape shape, const char* op, std::vector<std::shared_ptr<TensorNode>> parents) {
  auto node = std::make_shared<TensorNode>();
  node->values.resize(static_cast<std::size_t>(shape_numel(shape)));
  node->shape = std::move(shape);
  node->op = op;
  node->leaf = false;
  bool needs_grad = false;
  if (GradMode::enabled()) {
    for (const auto& p : parents) needs_grad = needs_grad || p->requires_grad;
  }
  node->requires_grad = needs_grad;
  if (needs_grad) {
    node->parents = std::move(parents);
  }
  return node;
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) {
    throw std::logic_error(std::string(op) + " called on an undefined tensor");
  }
}

}  // namespace detail

}  // namespace lc
