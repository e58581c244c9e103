#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace rvec::optim {

// Linear warmup from 0 over the first `warmup_steps`, then cosine decay that
// reaches exactly 0 at the final step.
class WarmupCosine {
 public:
  WarmupCosine(double peak, std::uint64_t total_steps, std::uint64_t warmup_steps);
  double at(std::uint64_t step) const noexcept;
  std::uint64_t total_steps() const noexcept { return total_; }
  std::uint64_t warmup_steps() const noexcept { return warmup_; }

 private:
  double peak_;
  std::uint64_t total_;
  std::uint64_t warmup_;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam over one flat parameter vector.
class Adam {
 public:
  explicit Adam(std::size_t size, AdamConfig config = {});
  // params -= lr * m_hat / (sqrt(v_hat) + eps)
  void step(std::span<double> params, std::span<const double> grads, double lr);
  std::uint64_t steps_taken() const noexcept { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::uint64_t t_ = 0;
};

}  // namespace rvec::optim
