#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "diffpush/bench/config.hpp"
#include "diffpush/diffusion/denoiser.hpp"
#include "diffpush/diffusion/sampler.hpp"
#include "diffpush/diffusion/schedule.hpp"
#include "diffpush/env/dataset.hpp"
#include "diffpush/env/observation.hpp"
#include "diffpush/executor/executor.hpp"

namespace diffpush::bench {

using executor::Chunk;

// What one episode needs sampled this step.
struct SampleRequest {
  const env::ObservationWindow* window = nullptr;
  const env::PushEnv* env = nullptr;
  int expert_side = 1;
  Rng* rng = nullptr;           // initial noise and sampler noise
  Rng* guidance_rng = nullptr;  // noised-observation draws
  std::size_t count = 0;
  std::vector<Chunk>* out = nullptr;
};

// Fills every request's `out` with `count` chunks in environment units.
class BatchPolicy {
 public:
  virtual ~BatchPolicy() = default;
  virtual void sample(std::span<const SampleRequest> requests) = 0;
  virtual std::size_t max_lag() const { return 1; }
};

struct ModelBundle {
  numerics::DenoiserParams strong;
  numerics::DenoiserParams weak;
  env::NormStats stats;
  diffusion::NoiseSchedule schedule;
};

// Denoises all requested chunks of all episodes in one batched sampler run.
// Row results do not depend on batch composition.
class DiffusionPolicy final : public BatchPolicy {
 public:
  DiffusionPolicy(const numerics::DenoiserParams& model, const numerics::DenoiserParams* weak,
                  const env::NormStats& stats, const diffusion::NoiseSchedule& schedule,
                  const guidance::GuidanceSpec& guidance, Solver solver,
                  std::size_t inference_steps, bool clip_x0);

  void sample(std::span<const SampleRequest> requests) override;
  std::size_t max_lag() const override { return guidance_.delta_t; }

  // Predictor calls and rows over the policy's lifetime.
  std::size_t model_calls() const { return model_.calls() + weak_.calls(); }
  std::size_t model_rows() const { return model_.rows() + weak_.rows(); }

 private:
  const numerics::DenoiserArch& arch() const { return mlp_.params().arch; }

  diffusion::MlpDenoiser mlp_;
  std::unique_ptr<diffusion::MlpDenoiser> weak_mlp_;
  diffusion::CountingPredictor model_;
  diffusion::CountingPredictor weak_;
  const env::NormStats* stats_;
  const diffusion::NoiseSchedule* schedule_;
  guidance::GuidanceSpec guidance_;
  Solver solver_;
  std::size_t inference_steps_;
  diffusion::SamplerOptions options_;
};

// Expert rollouts on a drift-free copy of the current state, H steps long.
class ExpertPolicy final : public BatchPolicy {
 public:
  ExpertPolicy(std::size_t horizon, const env::ExpertConfig& expert = {})
      : horizon_(horizon), expert_(expert) {}
  void sample(std::span<const SampleRequest> requests) override;

 private:
  std::size_t horizon_;
  env::ExpertConfig expert_;
};

// Normalized condition row [window | null flag] for the current or shifted
// window.
numerics::Tensor condition_for(const numerics::DenoiserArch& arch, const env::NormStats& stats,
                               const env::ObservationWindow& window, std::size_t lag);

// Normalized image of the action box [-1, 1]^d repeated over the horizon.
diffusion::ChunkBounds action_box_bounds(const env::NormStats& stats, std::size_t horizon);

}  // namespace diffpush::bench
