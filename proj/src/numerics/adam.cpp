#include "diffpush/numerics/adam.hpp"

#include <cmath>

#include "diffpush/errors.hpp"

namespace diffpush::numerics {

OptimState OptimState::for_params(std::span<const ParamRef> params,
                                  AdamConfig config) {
  OptimState s;
  s.config = config;
  for (const auto& p : params) {
    s.first_moment.emplace_back(p.tensor->shape(), 0.0);
    s.second_moment.emplace_back(p.tensor->shape(), 0.0);
  }
  return s;
}

void adam_step(std::span<const ParamRef> params, const Gradients& grads,
               OptimState& state) {
  const auto& entries = grads.entries();
  if (entries.size() != params.size() ||
      state.first_moment.size() != params.size()) {
    throw ConfigError("adam: " + std::to_string(params.size()) +
                      " parameters, " + std::to_string(entries.size()) +
                      " gradients, " +
                      std::to_string(state.first_moment.size()) + " moments");
  }
  if (!(state.config.lr > 0.0)) {
    throw ConfigError("adam: learning rate must be positive");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (entries[i].name != params[i].name) {
      throw ConfigError("adam: gradient '" + entries[i].name +
                        "' does not match parameter '" + params[i].name + "'");
    }
    require_same_shape(*params[i].tensor, entries[i].grad, "adam gradient");
    if (!entries[i].grad.all_finite()) {
      throw TrainingError("non-finite gradient for parameter '" +
                          params[i].name + "'");
    }
  }

  state.step += 1;
  const AdamConfig& c = state.config;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i].tensor;
    const Tensor& g = entries[i].grad;
    Tensor& m = state.first_moment[i];
    Tensor& v = state.second_moment[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      p[j] -= c.lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

}  // namespace diffpush::numerics
