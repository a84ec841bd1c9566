#include "diffpush/bench/policy.hpp"

#include <algorithm>

#include "diffpush/env/expert.hpp"
#include "diffpush/errors.hpp"

namespace diffpush::bench {

using numerics::Tensor;

Tensor condition_for(const numerics::DenoiserArch& arch, const env::NormStats& stats,
                     const env::ObservationWindow& window, std::size_t lag) {
  const auto flat = window.shifted(lag);
  std::vector<double> normed(flat.size());
  for (std::size_t j = 0; j < flat.size(); ++j) {
    normed[j] = stats.norm_obs(flat[j], j % env::kObsDim);
  }
  return diffusion::condition_row(arch, normed);
}

diffusion::ChunkBounds action_box_bounds(const env::NormStats& stats, std::size_t horizon) {
  diffusion::ChunkBounds b;
  for (std::size_t i = 0; i < horizon; ++i) {
    for (std::size_t d = 0; d < env::kActionDim; ++d) {
      b.lo.push_back(stats.norm_act(-1.0, d));
      b.hi.push_back(stats.norm_act(1.0, d));
    }
  }
  return b;
}

DiffusionPolicy::DiffusionPolicy(const numerics::DenoiserParams& model,
                                 const numerics::DenoiserParams* weak,
                                 const env::NormStats& stats,
                                 const diffusion::NoiseSchedule& schedule,
                                 const guidance::GuidanceSpec& guidance, Solver solver,
                                 std::size_t inference_steps, bool clip_x0)
    : mlp_(model),
      weak_mlp_(weak ? std::make_unique<diffusion::MlpDenoiser>(*weak) : nullptr),
      model_(mlp_),
      weak_(weak_mlp_ ? static_cast<const diffusion::NoisePredictor&>(*weak_mlp_)
                      : static_cast<const diffusion::NoisePredictor&>(mlp_)),
      stats_(&stats),
      schedule_(&schedule),
      guidance_(guidance),
      solver_(solver),
      inference_steps_(inference_steps) {
  if (weak && !(weak->arch == model.arch)) {
    throw ConfigError("weak checkpoint architecture differs from the main checkpoint");
  }
  if (guidance_.kind == guidance::GuidanceKind::autoguidance && !weak) {
    throw ConfigError("autoguidance needs a weak checkpoint");
  }
  if (clip_x0) {
    options_.clip_x0 = action_box_bounds(stats, model.arch.horizon);
  }
}

void DiffusionPolicy::sample(std::span<const SampleRequest> requests) {
  std::size_t rows = 0;
  for (const auto& r : requests) {
    rows += r.count;
  }
  if (rows == 0) {
    return;
  }
  const auto& a = arch();
  Tensor cond = Tensor::matrix(rows, a.cond_dim());
  Tensor prev = Tensor::matrix(rows, a.cond_dim());
  std::vector<Rng*> rngs, guidance_rngs;
  std::size_t row = 0;
  const bool self = guidance_.kind == guidance::GuidanceKind::self_guidance;
  for (const auto& r : requests) {
    const Tensor c = condition_for(a, *stats_, *r.window, 0);
    const Tensor p = self ? condition_for(a, *stats_, *r.window, guidance_.delta_t) : c;
    for (std::size_t i = 0; i < r.count; ++i, ++row) {
      std::copy(c.values().begin(), c.values().end(), cond.row(row).begin());
      std::copy(p.values().begin(), p.values().end(), prev.row(row).begin());
      rngs.push_back(r.rng);
      guidance_rngs.push_back(r.guidance_rng);
    }
  }
  guidance::GuidedEpsilon::Inputs in;
  in.model = &model_;
  in.weak = &weak_;
  in.cond = std::move(cond);
  in.prev_cond = std::move(prev);
  in.noise_rngs = guidance_rngs;
  in.max_step = schedule_->steps();
  guidance::GuidedEpsilon eps(guidance_, std::move(in));
  const Tensor x = solver_ == Solver::ddim
                       ? diffusion::ddim_sample(eps, *schedule_, inference_steps_, rngs,
                                                a.chunk_dim(), options_)
                       : diffusion::ddpm_sample(eps, *schedule_, rngs, a.chunk_dim(), options_);
  row = 0;
  for (const auto& r : requests) {
    r.out->clear();
    for (std::size_t i = 0; i < r.count; ++i, ++row) {
      Chunk c = Tensor::matrix(a.horizon, env::kActionDim);
      const auto src = x.row(row);
      for (std::size_t e = 0; e < src.size(); ++e) {
        const double v = stats_->denorm_act(src[e], e % env::kActionDim);
        c[e] = std::clamp(v, -1.0, 1.0);
      }
      r.out->push_back(std::move(c));
    }
  }
}

void ExpertPolicy::sample(std::span<const SampleRequest> requests) {
  for (const auto& r : requests) {
    r.out->clear();
    if (r.count == 0) {
      continue;
    }
    env::EnvConfig cfg = r.env->config();
    cfg.max_steps = r.env->state().step + horizon_ + 1;
    env::PushEnv sim(cfg, {}, 0, r.env->state());
    Chunk c = Tensor::matrix(horizon_, env::kActionDim);
    for (std::size_t i = 0; i < horizon_; ++i) {
      const env::Vec2 act = env::expert_action(sim.state(), cfg, r.expert_side, expert_);
      c.row(i)[0] = act.x;
      c.row(i)[1] = act.y;
      if (!sim.done()) {
        sim.step(act);
      }
    }
    for (std::size_t k = 0; k < r.count; ++k) {
      r.out->push_back(c);
    }
  }
}

}  // namespace diffpush::bench
