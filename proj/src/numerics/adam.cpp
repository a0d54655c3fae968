#include "mmal/numerics/adam.hpp"

#include <cmath>

#include "mmal/errors.hpp"

namespace mmal::numerics {

void zero_grad(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

double grad_norm(std::span<Parameter* const> params) {
  double total = 0.0;
  for (const Parameter* p : params)
    for (double g : p->grad.values()) total += g * g;
  return std::sqrt(total);
}

void AdamState::update(std::span<Parameter* const> params) {
  if (m_.empty()) {
    for (const Parameter* p : params) {
      m_.emplace_back(p->value.rows(), p->value.cols());
      v_.emplace_back(p->value.rows(), p->value.cols());
    }
  }
  require(params.size() == m_.size(), "adam_update: parameter count changed");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = *params[i];
    if (!(p.value.same_shape(m_[i]) && p.grad.same_shape(m_[i])))
      throw ContractError("adam_update: shape mismatch for " + p.name + " (" + p.value.shape_string() +
                          ", grad " + p.grad.shape_string() + ", state " + m_[i].shape_string() + ")");
    if (!p.grad.all_finite())
      throw ContractError("adam_update: non-finite gradient in " + p.name);
  }

  double clip = 1.0;
  if (config_.max_grad_norm > 0.0) {
    const double norm = grad_norm(params);
    if (norm > config_.max_grad_norm) clip = config_.max_grad_norm / norm;
  }

  ++step_;
  const double t = static_cast<double>(step_);
  const double bc1 = 1.0 - std::pow(config_.beta1, t);
  const double bc2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    Matrix& m = m_[i];
    Matrix& v = v_[i];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad[k] * clip;
      m[k] = config_.beta1 * m[k] + (1.0 - config_.beta1) * g;
      v[k] = config_.beta2 * v[k] + (1.0 - config_.beta2) * g * g;
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      p.value[k] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

}  // namespace mmal::numerics
