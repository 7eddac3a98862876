#include "afg/tensor.hpp"

#include <sstream>
#include <unordered_set>
#include <utility>

#include "afg/errors.hpp"

namespace afg {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::vector<Real>& detail::Node::grad_buffer() {
  if (grad.empty()) grad.assign(value.size(), Real{0});
  return grad;
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
  }
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), Real{0}, requires_grad); }

Tensor Tensor::full(Shape shape, Real value, bool requires_grad) {
  check_shape(shape);
  auto node = std::make_shared<detail::Node>();
  node->value.assign(shape_numel(shape), value);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<Real> values, bool requires_grad) {
  check_shape(shape);
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("shape " + shape_str(shape) + " does not match " + std::to_string(values.size()) +
                     " values");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::matrix(const std::vector<std::vector<Real>>& rows, bool requires_grad) {
  if (rows.empty() || rows.front().empty()) throw ShapeError("matrix literal must be non-empty");
  std::vector<Real> flat;
  flat.reserve(rows.size() * rows.front().size());
  for (const auto& r : rows) {
    if (r.size() != rows.front().size()) throw ShapeError("ragged matrix literal");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return from({rows.size(), rows.front().size()}, std::move(flat), requires_grad);
}

Tensor Tensor::scalar(Real value, bool requires_grad) { return from({1}, {value}, requires_grad); }

std::size_t Tensor::rows() const {
  const Shape& s = node_->shape;
  std::size_t r = 1;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) r *= s[i];
  return r;
}

std::size_t Tensor::cols() const { return node_->shape.back(); }

Real Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

void Tensor::set_requires_grad(bool on) {
  if (!node_->is_leaf()) throw GraphError("requires_grad can only be changed on leaf tensors");
  node_->requires_grad = on;
}

void Tensor::zero_grad() { node_->grad.clear(); }

Tensor Tensor::detach() const {
  auto node = std::make_shared<detail::Node>();
  node->shape = node_->shape;
  node->value = node_->value;
  return Tensor(std::move(node));
}

Tensor Tensor::clone() const {
  Tensor t = detach();
  t.node_->requires_grad = node_->requires_grad && node_->is_leaf();
  return t;
}

ComputeGraph ComputeGraph::trace(const Tensor& root) {
  ComputeGraph graph;
  if (!root.defined() || !root.requires_grad()) return graph;

  // Iterative post-order DFS: a node is emitted after all of its inputs.
  std::unordered_set<const detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (node->consumed) {
      throw GraphError(std::string("graph through op '") + node->op +
                       "' was already consumed by backward(); run a fresh forward pass");
    }
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
      continue;
    }
    graph.nodes_.push_back(node);
    stack.pop_back();
  }
  return graph;
}

std::vector<std::string> ComputeGraph::op_names() const {
  std::vector<std::string> names;
  names.reserve(nodes_.size());
  for (const auto* n : nodes_) names.emplace_back(n->op);
  return names;
}

void Tensor::backward() {
  if (!defined()) throw GraphError("backward() on an undefined tensor");
  if (numel() != 1) throw GraphError("backward() expects a scalar loss, got shape " + shape_str(shape()));
  if (node_->consumed) throw GraphError("backward() already ran on this loss; run a fresh forward pass");
  if (!node_->requires_grad) throw GraphError("loss does not depend on any tensor that requires grad");

  ComputeGraph graph = ComputeGraph::trace(*this);
  node_->grad_buffer()[0] += Real{1};

  const auto& nodes = graph.nodes();
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    detail::Node* n = *it;
    if (n->is_leaf() || n->grad.empty()) continue;
    n->backward_fn(*n);
  }

  // Release the graph; interior nodes become unusable for another backward.
  for (detail::Node* n : nodes) {
    if (n->is_leaf()) continue;  // parameters keep their accumulated grad
    n->consumed = true;
    n->backward_fn = nullptr;
    n->inputs.clear();
    n->inputs.shrink_to_fit();
    n->grad.clear();
    n->grad.shrink_to_fit();
  }
}

}  // namespace afg
