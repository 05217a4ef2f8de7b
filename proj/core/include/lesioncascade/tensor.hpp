#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "lesioncascade/errors.hpp"

namespace lc {

// Dense row-major shape. Rank 0 denotes a scalar (numel 1).
using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// One node of the reverse-mode graph. Operations allocate a node for their
// output, keep shared_ptrs to their inputs, and store a closure that scatters
// the node's gradient into the parents' gradients.
struct TensorNode {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until backward() touches this node
  bool requires_grad = false;
  bool leaf = true;
  const char* op = "leaf";
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward_fn;

  std::int64_t numel() const { return static_cast<std::int64_t>(values.size()); }
};

// Shared handle to a graph node. Copying a Tensor aliases the node; values are
// treated as immutable once the tensor has been consumed by an operation.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode> node) : node(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_values(Shape shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node != nullptr; }
  const Shape& shape() const;
  int rank() const;
  std::int64_t numel() const;
  std::int64_t dim(int axis) const;  // negative axis counts from the back
  bool requires_grad() const;

  std::vector<double>& values();
  const std::vector<double>& values() const;
  double item() const;  // single-element tensors only
  double at(std::initializer_list<std::int64_t> index) const;

  bool has_grad() const;
  const std::vector<double>& grad() const;  // throws if grad was never populated
  void zero_grad();                         // allocates if needed

  bool all_finite() const;

  // Reverse pass from a single-element tensor. seed is the incoming gradient.
  // Gradients of reachable leaf tensors accumulate across calls; intermediate
  // node gradients are reset on every call.
  void backward(double seed = 1.0) const;

  std::shared_ptr<TensorNode> node;
};

// Topological ordering (producers first) of the requires_grad subgraph that
// feeds `root`. Nodes that do not require grad are never entered.
struct Tape {
  std::vector<TensorNode*> order;
  static Tape build(TensorNode* root);
};

void backward(const Tensor& root, double seed = 1.0);

// Thread-local switch: while disabled, operations compute values but record
// no graph, so inference never retains parents or backward closures.
struct GradMode {
  static bool enabled();
  static void set_enabled(bool on);
};

class NoGradGuard {
 public:
  NoGradGuard() : previous_(GradMode::enabled()) { GradMode::set_enabled(false); }
  ~NoGradGuard() { GradMode::set_enabled(previous_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

namespace detail {
// Shared output-node constructor for operations: decides requires_grad from
// GradMode and the parents, and drops parent links when no grad is needed.
std::shared_ptr<TensorNode> make_op_node(
    Shape shape, const char* op, std::vector<std::shared_ptr<TensorNode>> parents);
void require_defined(const Tensor& t, const char* op);
}  // namespace detail

}  // namespace lc
