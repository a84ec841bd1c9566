#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "diffpush/diffusion/denoiser.hpp"
#include "diffpush/diffusion/sampler.hpp"
#include "diffpush/random.hpp"

namespace diffpush::guidance {

using diffusion::NoisePredictor;
using numerics::Tensor;

enum class GuidanceKind { none, cfg, autoguidance, self_guidance, noised_obs, timestep };

GuidanceKind parse_guidance_kind(const std::string& name);
std::string to_string(GuidanceKind kind);

struct GuidanceSpec {
  GuidanceKind kind = GuidanceKind::none;
  double w = 0.0;
  std::size_t delta_t = 1;    // self-guidance lag
  double noise_scale = 0.1;   // noised observation
  double tsg_scale = 2.0;     // timestep guidance
  double tsg_alpha = 1.0;

  // Throws ConfigError for negative scales or a zero lag.
  void validate() const;
  friend bool operator==(const GuidanceSpec&, const GuidanceSpec&) = default;
};

// (1 + w) cond - w neg, evaluated as cond + w (cond - neg) so that equal
// inputs and w = 0 return cond exactly.
Tensor combine(const Tensor& eps_cond, const Tensor& eps_neg, double w);

// Rows of x [B x chunk] share one step k. `cond` and the negative conditions
// are [B x cond_dim].

// One model call of 2B rows: [x; x] under [cond; prev_cond].
Tensor self_guided_eps(const NoisePredictor& model, const Tensor& x, const Tensor& cond,
                       const Tensor& prev_cond, std::size_t step, double w);

// Strong and weak models on the same input and condition.
Tensor autoguided_eps(const NoisePredictor& strong, const NoisePredictor& weak,
                      const Tensor& x, const Tensor& cond, std::size_t step, double w);

// Negative branch under the null condition; ConfigError when the model has
// none.
Tensor cfg_eps(const NoisePredictor& model, const Tensor& x, const Tensor& cond,
               std::size_t step, double w);

// Negative branch under cond + scale * delta on the observation columns,
// delta ~ N(0, I) drawn from rngs[r] for row r on every call.
Tensor noised_obs_eps(const NoisePredictor& model, const Tensor& x, const Tensor& cond,
                      std::size_t step, double w, double scale,
                      std::span<Rng* const> rngs);

// round(k + scale * k^alpha) clamped into [1, max_step].
std::size_t perturbed_timestep(std::size_t step, double scale, double alpha,
                               std::size_t max_step);

// Negative branch at the perturbed step.
Tensor timestep_guided_eps(const NoisePredictor& model, const Tensor& x,
                           const Tensor& cond, std::size_t step, double w, double scale,
                           double alpha, std::size_t max_step);

// Sampler-facing adapter applying `spec` at every denoising step.
class GuidedEpsilon final : public diffusion::EpsilonModel {
 public:
  struct Inputs {
    const NoisePredictor* model = nullptr;
    const NoisePredictor* weak = nullptr;  // autoguidance
    Tensor cond;
    Tensor prev_cond;                      // self-guidance
    std::span<Rng* const> noise_rngs;      // noised observation
    std::size_t max_step = 0;              // timestep guidance
  };

  // Throws ConfigError when `inputs` lack what `spec.kind` needs.
  GuidedEpsilon(GuidanceSpec spec, Inputs inputs);
  Tensor epsilon(const Tensor& x, std::size_t step) override;

 private:
  GuidanceSpec spec_;
  Inputs in_;
};

}  // namespace diffpush::guidance
