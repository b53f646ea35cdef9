#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tabplus/tensor.hpp"

namespace tabplus {

/// A learned tensor with its dotted path and Adam state.
class Parameter {
 public:
  Parameter() = default;
  Parameter(std::string name, Shape shape, std::vector<double> values);

  Parameter(Parameter&&) noexcept = default;
  Parameter& operator=(Parameter&&) noexcept = default;
  Parameter(const Parameter&) = delete;
  Parameter& operator=(const Parameter&) = delete;

  const std::string& name() const noexcept { return name_; }
  const Tensor& tensor() const noexcept { return tensor_; }
  Tensor& tensor() noexcept { return tensor_; }
  const Shape& shape() const { return tensor_.shape(); }
  std::size_t size() const { return tensor_.size(); }

  std::span<const double> first_moment() const noexcept { return m_; }
  std::span<const double> second_moment() const noexcept { return v_; }
  std::uint64_t step() const noexcept { return step_; }

  void zero_grad() { tensor_.zero_grad(); }
  /// Clears the optimizer state (moments and step counter).
  void reset_optimizer_state();

 private:
  friend void adam_step(std::span<Parameter* const> params, double lr);

  std::string name_;
  Tensor tensor_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::uint64_t step_ = 0;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

/// One bias-corrected Adam update (no weight decay) of every parameter.
/// Throws std::invalid_argument naming the first parameter without a gradient;
/// in that case no parameter is modified.
void adam_step(std::span<Parameter* const> params, double lr);

inline constexpr double kStepDecayGamma = 0.95;

/// Step decay: lr(epoch) = initial * 0.95^floor(epoch / step_interval).
class LrSchedule {
 public:
  LrSchedule(double initial_lr, int step_interval);

  double at(int epoch) const;
  double initial() const noexcept { return initial_; }
  int step_interval() const noexcept { return step_interval_; }

 private:
  double initial_;
  int step_interval_;
};

}  // namespace tabplus
