#include "diffpush/diffusion/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "diffpush/errors.hpp"

namespace diffpush::diffusion {

namespace {

void check_epsilon(const Tensor& eps, const Tensor& x) {
  if (!eps.same_shape(x)) {
    throw ConfigError("epsilon model returned " + eps.shape_string() + " for input " +
                      x.shape_string());
  }
}

void check_bounds(const SamplerOptions& options, std::size_t dim) {
  if (options.clip_x0 &&
      (options.clip_x0->lo.size() != dim || options.clip_x0->hi.size() != dim)) {
    throw ConfigError("x0 clip bounds do not match chunk size " + std::to_string(dim));
  }
}

// x0 = (x - sqrt(1 - ab) eps) / sqrt(ab), optionally clipped.
double predict_x0(double x, double eps, double sqrt_ab, double sqrt_1mab,
                  const SamplerOptions& options, std::size_t j) {
  double x0 = (x - sqrt_1mab * eps) / sqrt_ab;
  if (options.clip_x0) {
    x0 = std::clamp(x0, options.clip_x0->lo[j], options.clip_x0->hi[j]);
  }
  return x0;
}

}  // namespace

Tensor PlainEpsilon::epsilon(const Tensor& x, std::size_t step) {
  const std::vector<double> steps(x.rows(), static_cast<double>(step));
  return model_->predict(x, cond_, steps);
}

std::vector<std::size_t> ddim_timesteps(std::size_t train_steps,
                                        std::size_t inference_steps) {
  if (inference_steps < 1 || inference_steps > train_steps) {
    throw ConfigError("DDIM needs 1 <= inference steps <= K, got " +
                      std::to_string(inference_steps) + " with K = " +
                      std::to_string(train_steps));
  }
  std::vector<std::size_t> ts(inference_steps);
  for (std::size_t i = 0; i < inference_steps; ++i) {
    ts[i] = train_steps - (i * train_steps) / inference_steps;
  }
  return ts;
}

Tensor initial_noise(std::span<Rng* const> rngs, std::size_t dim) {
  Tensor x = Tensor::matrix(rngs.size(), dim);
  for (std::size_t r = 0; r < rngs.size(); ++r) {
    for (double& v : x.row(r)) {
      v = rngs[r]->normal();
    }
  }
  return x;
}

Tensor ddim_denoise(EpsilonModel& model, const NoiseSchedule& schedule,
                    std::size_t inference_steps, Tensor x,
                    const SamplerOptions& options) {
  const auto ts = ddim_timesteps(schedule.steps(), inference_steps);
  const std::size_t dim = x.cols();
  check_bounds(options, dim);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const std::size_t t = ts[i];
    const std::size_t prev = i + 1 < ts.size() ? ts[i + 1] : 0;
    const Tensor eps = model.epsilon(x, t);
    check_epsilon(eps, x);
    const double ab = schedule.alpha_bar(t);
    const double ab_prev = schedule.alpha_bar(prev);
    const double sqrt_ab = std::sqrt(ab);
    const double sqrt_1mab = std::sqrt(1.0 - ab);
    const double sqrt_ab_prev = std::sqrt(ab_prev);
    const double sqrt_1mab_prev = std::sqrt(1.0 - ab_prev);
    for (std::size_t e = 0; e < x.size(); ++e) {
      const double x0 = predict_x0(x[e], eps[e], sqrt_ab, sqrt_1mab, options, e % dim);
      x[e] = sqrt_ab_prev * x0 + sqrt_1mab_prev * eps[e];
    }
  }
  return x;
}

Tensor ddim_sample(EpsilonModel& model, const NoiseSchedule& schedule,
                   std::size_t inference_steps, std::span<Rng* const> rngs,
                   std::size_t dim, const SamplerOptions& options) {
  ddim_timesteps(schedule.steps(), inference_steps);
  return ddim_denoise(model, schedule, inference_steps, initial_noise(rngs, dim), options);
}

Tensor ddpm_sample(EpsilonModel& model, const NoiseSchedule& schedule,
                   std::span<Rng* const> rngs, std::size_t dim,
                   const SamplerOptions& options) {
  check_bounds(options, dim);
  Tensor x = initial_noise(rngs, dim);
  for (std::size_t t = schedule.steps(); t >= 1; --t) {
    const Tensor eps = model.epsilon(x, t);
    check_epsilon(eps, x);
    const double ab = schedule.alpha_bar(t);
    const double ab_prev = schedule.alpha_bar(t - 1);
    const double beta = schedule.beta(t);
    const double sqrt_ab = std::sqrt(ab);
    const double sqrt_1mab = std::sqrt(1.0 - ab);
    const double c_x0 = std::sqrt(ab_prev) * beta / (1.0 - ab);
    const double c_xt = std::sqrt(schedule.alpha(t)) * (1.0 - ab_prev) / (1.0 - ab);
    const double sigma = t > 1 ? std::sqrt(schedule.posterior_variance(t)) : 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) {
      auto xr = x.row(r);
      auto er = eps.row(r);
      for (std::size_t j = 0; j < dim; ++j) {
        const double x0 = predict_x0(xr[j], er[j], sqrt_ab, sqrt_1mab, options, j);
        xr[j] = c_x0 * x0 + c_xt * xr[j];
      }
      if (t > 1) {
        for (double& v : xr) {
          v += sigma * rngs[r]->normal();
        }
      }
    }
  }
  return x;
}

}  // namespace diffpush::diffusion
