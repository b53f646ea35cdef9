#include "tabplus/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace tabplus {

Parameter::Parameter(std::string name, Shape shape, std::vector<double> values)
    : name_(std::move(name)),
      tensor_(Tensor::from(std::move(shape), std::move(values), true)),
      m_(tensor_.size(), 0.0),
      v_(tensor_.size(), 0.0) {}

void Parameter::reset_optimizer_state() {
  std::fill(m_.begin(), m_.end(), 0.0);
  std::fill(v_.begin(), v_.end(), 0.0);
  step_ = 0;
}

void adam_step(std::span<Parameter* const> params, double lr) {
  for (const Parameter* p : params) {
    if (!p->tensor().has_grad()) {
      throw std::invalid_argument("adam_step: parameter '" + p->name() + "' has no gradient");
    }
  }
  for (Parameter* p : params) {
    const std::uint64_t t = ++p->step_;
    const double correction1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(t));
    const double correction2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(t));
    const auto g = p->tensor_.grad();
    auto w = p->tensor_.mutable_values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      p->m_[i] = kAdamBeta1 * p->m_[i] + (1.0 - kAdamBeta1) * g[i];
      p->v_[i] = kAdamBeta2 * p->v_[i] + (1.0 - kAdamBeta2) * g[i] * g[i];
      const double m_hat = p->m_[i] / correction1;
      const double v_hat = p->v_[i] / correction2;
      w[i] -= lr * m_hat / (std::sqrt(v_hat) + kAdamEpsilon);
    }
  }
}

LrSchedule::LrSchedule(double initial_lr, int step_interval)
    : initial_(initial_lr), step_interval_(step_interval) {
  if (step_interval <= 0) throw std::invalid_argument("LrSchedule: step interval must be positive");
  if (!(initial_lr > 0.0)) throw std::invalid_argument("LrSchedule: learning rate must be positive");
}

double LrSchedule::at(int epoch) const {
  const int decays = epoch / step_interval_;
  return initial_ * std::pow(kStepDecayGamma, decays);
}

}  // namespace tabplus
