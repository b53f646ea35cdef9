#include "tabplus/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <unordered_set>

namespace tabplus {

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::uint64_t id = 0;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;
};

}  // namespace detail

namespace {

std::atomic<std::uint64_t> g_next_id{1};
thread_local bool g_grad_enabled = true;

std::shared_ptr<detail::Node> make_node(Shape shape, std::vector<double> values,
                                        bool requires_grad) {
  if (numel(shape) != values.size()) {
    throw ShapeError("tensor", shape, Shape{values.size()}, "value count does not match shape");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  node->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  return node;
}

}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

ShapeError::ShapeError(std::string op, Shape lhs, Shape rhs, const std::string& detail)
    : std::invalid_argument(op + ": incompatible shapes " + to_string(lhs) + " and " +
                            to_string(rhs) + (detail.empty() ? "" : " (" + detail + ")")),
      op_(std::move(op)),
      lhs_(std::move(lhs)),
      rhs_(std::move(rhs)) {}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = numel(shape);
  return Tensor(make_node(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  return Tensor(make_node(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(make_node(Shape{1}, std::vector<double>{value}, requires_grad));
}

Tensor Tensor::result(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
                      BackwardFn backward) {
  const bool track = g_grad_enabled &&
                     std::any_of(parents.begin(), parents.end(),
                                 [](const Tensor& p) { return p.requires_grad(); });
  auto node = make_node(std::move(shape), std::move(values), track);
  if (track) {
    node->parents.reserve(parents.size());
    for (auto& p : parents) {
      if (p.requires_grad()) node->parents.push_back(p.node_);
    }
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

detail::Node& Tensor::node() const {
  if (!node_) throw std::logic_error("use of an undefined tensor");
  return *node_;
}

const Shape& Tensor::shape() const { return node().shape; }
std::size_t Tensor::size() const { return node().value.size(); }
std::uint64_t Tensor::id() const { return node().id; }
std::span<const double> Tensor::values() const { return node().value; }
std::span<double> Tensor::mutable_values() { return node().value; }

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item", shape(), Shape{1}, "tensor is not a scalar");
  return node().value[0];
}

bool Tensor::requires_grad() const { return node().requires_grad; }
bool Tensor::has_grad() const { return !node().grad.empty() || size() == 0; }
std::span<const double> Tensor::grad() const { return node().grad; }

std::span<double> Tensor::grad_accumulator() const {
  auto& n = node();
  if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

void Tensor::zero_grad() {
  auto& n = node();
  std::fill(n.grad.begin(), n.grad.end(), 0.0);
}

void Tensor::backward() const {
  auto& root = node();
  if (root.value.size() != 1) {
    throw ShapeError("backward", root.shape, Shape{1}, "loss must be a scalar");
  }
  if (!root.requires_grad) throw std::invalid_argument("backward: loss does not require grad");

  // Iterative post-order DFS yields parents before children.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{&root, 0}};
  visited.insert(&root);
  while (!stack.empty()) {
    auto& [current, next_parent] = stack.back();
    if (next_parent < current->parents.size()) {
      detail::Node* parent = current->parents[next_parent++].get();
      if (visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(current);
      stack.pop_back();
    }
  }

  for (auto* n : order) {
    if (n->backward) {
      n->grad.assign(n->value.size(), 0.0);
    } else if (n->grad.size() != n->value.size()) {
      n->grad.assign(n->value.size(), 0.0);
    }
  }
  root.grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward((*it)->grad, (*it)->value);
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

}  // namespace tabplus
