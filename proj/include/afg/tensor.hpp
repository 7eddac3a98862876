#pragma once

// Dense row-major tensors with a reverse-mode tape.
//
// Every op in ops.hpp returns a fresh Tensor. When gradient recording is on
// and any input requires a gradient, the result keeps references to its
// inputs plus a closure that pushes its gradient back to them. backward()
// walks that graph once in reverse topological order and then releases it;
// leaf gradients accumulate until zero_grad().

#include <cstddef>
#include <functional>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace afg {

using Real = double;
using Shape = std::vector<std::size_t>;
using TokenId = int;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<Real> value;
  std::vector<Real> grad;  // empty until first accumulation
  bool requires_grad = false;
  bool consumed = false;   // set on the loss node after backward
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  bool is_leaf() const { return !backward_fn; }
  std::vector<Real>& grad_buffer();
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, Real value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<Real> values, bool requires_grad = false);
  static Tensor matrix(const std::vector<std::vector<Real>>& rows, bool requires_grad = false);
  static Tensor scalar(Real value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->value.size(); }
  // Leading dimensions folded into rows; last dimension is columns.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const Real> data() const { return node_->value; }
  // Writable view; only valid on leaves (parameters, inputs).
  std::span<Real> mutable_data() { return node_->value; }
  Real at(std::size_t i) const { return node_->value[i]; }
  Real at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }
  Real item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on);
  bool has_grad() const { return !node_->grad.empty(); }
  // Gradient view; empty span when no gradient has been accumulated.
  std::span<const Real> grad() const { return node_->grad; }
  void zero_grad();
  const char* op_name() const { return node_->op; }

  // Runs reverse-mode differentiation from this scalar. Throws GraphError
  // when called twice on the same graph or on a non-scalar.
  void backward();

  // Copy of the values without history.
  Tensor detach() const;
  Tensor clone() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// Ordered record of the recorded ops reachable from a loss. Nodes are in
// topological order (inputs before consumers), each exactly once.
class ComputeGraph {
 public:
  static ComputeGraph trace(const Tensor& root);

  std::size_t size() const { return nodes_.size(); }
  const std::vector<detail::Node*>& nodes() const { return nodes_; }
  std::vector<std::string> op_names() const;

 private:
  std::vector<detail::Node*> nodes_;
};

// Global (thread-local) switch for recording. Evaluation and decoding run
// under NoGradGuard so no graph is retained.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace afg
