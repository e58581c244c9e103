#include "rvec/optim.hpp"

#include <cmath>
#include <numbers>

#include "rvec/error.hpp"

namespace rvec::optim {

WarmupCosine::WarmupCosine(double peak, std::uint64_t total_steps, std::uint64_t warmup_steps)
    : peak_(peak), total_(total_steps), warmup_(warmup_steps) {
  if (total_ == 0) throw ValidationError("schedule: total_steps must be positive");
  if (warmup_ >= total_) throw ValidationError("schedule: warmup must end before the last step");
}

double WarmupCosine::at(std::uint64_t step) const noexcept {
  if (step < warmup_) return peak_ * static_cast<double>(step) / static_cast<double>(warmup_);
  const std::uint64_t decay_span = total_ - 1 - warmup_;
  if (decay_span == 0) return peak_;
  const double progress =
      std::min(1.0, static_cast<double>(step - warmup_) / static_cast<double>(decay_span));
  return peak_ * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

Adam::Adam(std::size_t size, AdamConfig config) : cfg_(config), m_(size, 0.0), v_(size, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grads, double lr) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw DimensionError("Adam::step: parameter size mismatch");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grads[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grads[i] * grads[i];
    const double m_hat = m_[i] / c1;
    const double v_hat = v_[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
  }
}

}  // namespace rvec::optim
