#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tabplus {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Raised by any op whose input shapes are incompatible.
class ShapeError : public std::invalid_argument {
 public:
  ShapeError(std::string op, Shape lhs, Shape rhs, const std::string& detail = {});

  const std::string& op() const noexcept { return op_; }
  const Shape& lhs() const noexcept { return lhs_; }
  const Shape& rhs() const noexcept { return rhs_; }

 private:
  std::string op_;
  Shape lhs_;
  Shape rhs_;
};

namespace detail {
struct Node;
}

/// Backward rule of an op: receives d(loss)/d(output) and the output values,
/// and accumulates into the parents it captured.
using BackwardFn =
    std::function<void(std::span<const double> grad_out, std::span<const double> value_out)>;

/// Handle to a node of a define-by-run differentiation graph.
///
/// Copies alias the same node. Results of ops record their parents only when
/// at least one parent requires grad and recording is enabled (see NoGradGuard).
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  /// Builds an op result. `backward` is kept only if some parent requires grad.
  static Tensor result(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
                       BackwardFn backward);

  bool defined() const noexcept { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const { return shape().at(axis); }
  std::size_t size() const;
  std::uint64_t id() const;

  std::span<const double> values() const;
  std::span<double> mutable_values();
  double item() const;

  bool requires_grad() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  /// Gradient buffer, allocated (zeroed) on first access.
  std::span<double> grad_accumulator() const;
  void zero_grad();

  /// Reverse-mode pass from a scalar. Leaf grads accumulate across calls;
  /// intermediate grads are recomputed each call.
  void backward() const;

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  detail::Node& node() const;

  std::shared_ptr<detail::Node> node_;
};

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

}  // namespace tabplus
