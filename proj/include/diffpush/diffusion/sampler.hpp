#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "diffpush/diffusion/denoiser.hpp"
#include "diffpush/diffusion/schedule.hpp"
#include "diffpush/random.hpp"

namespace diffpush::diffusion {

// Noise estimate for a batch of noisy chunks that all sit at the same
// diffusion step. Guidance rules implement this; samplers only consume it.
class EpsilonModel {
 public:
  virtual ~EpsilonModel() = default;
  virtual Tensor epsilon(const Tensor& x, std::size_t step) = 0;
};

// Unguided epsilon_theta(x, s, k) with one fixed condition row per batch row.
class PlainEpsilon final : public EpsilonModel {
 public:
  PlainEpsilon(const NoisePredictor& model, Tensor cond)
      : model_(&model), cond_(std::move(cond)) {}
  Tensor epsilon(const Tensor& x, std::size_t step) override;

 private:
  const NoisePredictor* model_;
  Tensor cond_;
};

// Per-element clip range for the predicted clean chunk.
struct ChunkBounds {
  std::vector<double> lo;
  std::vector<double> hi;
};

struct SamplerOptions {
  std::optional<ChunkBounds> clip_x0;
};

// Strided DDIM schedule: t_i = K - floor(i K / S) for i = 0..S-1, descending
// from K to at least 1. Throws ConfigError unless 1 <= S <= K.
std::vector<std::size_t> ddim_timesteps(std::size_t train_steps, std::size_t inference_steps);

// One standard-normal row per generator, `dim` draws each.
Tensor initial_noise(std::span<Rng* const> rngs, std::size_t dim);

// Deterministic (eta = 0) DDIM pass starting from x_K = `x`.
Tensor ddim_denoise(EpsilonModel& model, const NoiseSchedule& schedule,
                    std::size_t inference_steps, Tensor x,
                    const SamplerOptions& options = {});

// initial_noise followed by ddim_denoise. Row r uses rngs[r] only.
Tensor ddim_sample(EpsilonModel& model, const NoiseSchedule& schedule,
                   std::size_t inference_steps, std::span<Rng* const> rngs,
                   std::size_t dim, const SamplerOptions& options = {});

// Ancestral sampling over k = K..1 with variance posterior_variance(k); the
// step to k = 0 adds no noise. Row r draws from rngs[r] only.
Tensor ddpm_sample(EpsilonModel& model, const NoiseSchedule& schedule,
                   std::span<Rng* const> rngs, std::size_t dim,
                   const SamplerOptions& options = {});

}  // namespace diffpush::diffusion
