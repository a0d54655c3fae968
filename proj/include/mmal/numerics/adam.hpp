#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mmal/numerics/tape.hpp"

namespace mmal::numerics {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Global L2 gradient-norm clip; 0 disables clipping.
  double max_grad_norm = 0.0;
};

/// Moment accumulators for one ordered list of parameters. The first
/// update() fixes the expected shapes; later calls must pass parameters
/// of the same shapes in the same order.
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(AdamConfig config) : config_(config) {}

  /// One bias-corrected Adam step using each parameter's .grad.
  void update(std::span<Parameter* const> params);

  std::int64_t step() const { return step_; }
  const AdamConfig& config() const { return config_; }
  AdamConfig& config() { return config_; }
  const std::vector<Matrix>& first_moment() const { return m_; }
  const std::vector<Matrix>& second_moment() const { return v_; }

 private:
  AdamConfig config_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::int64_t step_ = 0;
};

void zero_grad(std::span<Parameter* const> params);

/// L2 norm over all gradients.
double grad_norm(std::span<Parameter* const> params);

}  // namespace mmal::numerics
