#pragma once

#include <span>
#include <vector>

#include "diffpush/diffusion/denoiser.hpp"
#include "diffpush/diffusion/schedule.hpp"
#include "diffpush/numerics/autodiff.hpp"
#include "diffpush/numerics/mlp.hpp"
#include "diffpush/random.hpp"

namespace diffpush::diffusion {

struct NoisyChunk {
  Tensor values;
  std::size_t step = 0;  // 0 means clean
};

// sqrt(alpha_bar_k) * chunk + sqrt(1 - alpha_bar_k) * noise
NoisyChunk forward_noise(std::span<const double> chunk, std::size_t step,
                         std::span<const double> noise, const NoiseSchedule& schedule);

// Per-row draws for one training batch, taken from `rng` in row order:
// step k ~ U{1..K}, then noise ~ N(0, I), then the dropout coin.
struct NoisingDraw {
  Tensor noisy;
  Tensor noise;
  Tensor cond;
  std::vector<double> steps;
};

NoisingDraw draw_noising(const numerics::DenoiserArch& arch, const Tensor& chunks,
                         const Tensor& cond, const NoiseSchedule& schedule, Rng& rng,
                         double cond_dropout);

struct LossResult {
  double loss = 0.0;
  numerics::Gradients grads;
};

// mean over rows of ||eps - eps_theta(A^k, k, s)||^2 with gradients for every
// parameter. With cond_dropout > 0 the condition of each row is replaced by
// the null condition with that probability.
LossResult training_loss(const numerics::DenoiserParams& params, const Tensor& chunks,
                         const Tensor& cond, const NoiseSchedule& schedule, Rng& rng,
                         double cond_dropout = 0.0);

// Same objective for an arbitrary predictor, value only. Consumes `rng`
// identically to training_loss.
double loss_value(const NoisePredictor& predictor, const numerics::DenoiserArch& arch,
                  const Tensor& chunks, const Tensor& cond,
                  const NoiseSchedule& schedule, Rng& rng, double cond_dropout = 0.0);

}  // namespace diffpush::diffusion
