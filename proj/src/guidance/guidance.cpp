#include "diffpush/guidance/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "diffpush/errors.hpp"

namespace diffpush::guidance {

namespace {

Tensor stack(const Tensor& a, const Tensor& b) {
  std::vector<double> data(a.values().begin(), a.values().end());
  data.insert(data.end(), b.values().begin(), b.values().end());
  return Tensor({a.rows() + b.rows(), a.cols()}, std::move(data));
}

Tensor rows_range(const Tensor& t, std::size_t begin, std::size_t count) {
  const std::size_t cols = t.cols();
  const auto first = t.values().begin() + static_cast<std::ptrdiff_t>(begin * cols);
  return Tensor({count, cols},
                std::vector<double>(first, first + static_cast<std::ptrdiff_t>(count * cols)));
}

void check_inputs(const NoisePredictor& model, const Tensor& x, const Tensor& cond) {
  if (x.cols() != model.chunk_dim() || cond.cols() != model.cond_dim() ||
      cond.rows() != x.rows()) {
    throw ConfigError("guidance inputs " + x.shape_string() + " / " + cond.shape_string() +
                      " do not match the model");
  }
}

// Evaluates [x; x] under [cond; neg_cond] at per-half steps in one call and
// combines the halves.
Tensor paired(const NoisePredictor& model, const Tensor& x, const Tensor& cond,
              const Tensor& neg_cond, std::size_t step, std::size_t neg_step, double w) {
  check_inputs(model, x, cond);
  numerics::require_same_shape(cond, neg_cond, "negative condition");
  const std::size_t b = x.rows();
  std::vector<double> steps(2 * b, static_cast<double>(step));
  std::fill(steps.begin() + static_cast<std::ptrdiff_t>(b), steps.end(),
            static_cast<double>(neg_step));
  const Tensor out = model.predict(stack(x, x), stack(cond, neg_cond), steps);
  return combine(rows_range(out, 0, b), rows_range(out, b, b), w);
}

}  // namespace

GuidanceKind parse_guidance_kind(const std::string& name) {
  for (auto k : {GuidanceKind::none, GuidanceKind::cfg, GuidanceKind::autoguidance,
                 GuidanceKind::self_guidance, GuidanceKind::noised_obs,
                 GuidanceKind::timestep}) {
    if (to_string(k) == name) {
      return k;
    }
  }
  throw ConfigError("unknown guidance kind '" + name + "'");
}

std::string to_string(GuidanceKind kind) {
  switch (kind) {
    case GuidanceKind::none: return "none";
    case GuidanceKind::cfg: return "cfg";
    case GuidanceKind::autoguidance: return "autoguidance";
    case GuidanceKind::self_guidance: return "self_guidance";
    case GuidanceKind::noised_obs: return "noised_obs";
    case GuidanceKind::timestep: return "timestep";
  }
  return "none";
}

void GuidanceSpec::validate() const {
  if (!(w >= 0.0) || !std::isfinite(w)) {
    throw ConfigError("guidance scale w must be finite and >= 0");
  }
  if (delta_t < 1) {
    throw ConfigError("self-guidance delta_t must be >= 1");
  }
  if (!(noise_scale >= 0.0) || !(tsg_scale >= 0.0) || !std::isfinite(tsg_alpha)) {
    throw ConfigError("guidance noise_scale and tsg_scale must be >= 0");
  }
}

Tensor combine(const Tensor& eps_cond, const Tensor& eps_neg, double w) {
  numerics::require_same_shape(eps_cond, eps_neg, "combine");
  Tensor out = eps_cond;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = eps_cond[i] + w * (eps_cond[i] - eps_neg[i]);
  }
  return out;
}

Tensor self_guided_eps(const NoisePredictor& model, const Tensor& x, const Tensor& cond,
                       const Tensor& prev_cond, std::size_t step, double w) {
  return paired(model, x, cond, prev_cond, step, step, w);
}

Tensor autoguided_eps(const NoisePredictor& strong, const NoisePredictor& weak,
                      const Tensor& x, const Tensor& cond, std::size_t step, double w) {
  if (strong.chunk_dim() != weak.chunk_dim() || strong.cond_dim() != weak.cond_dim()) {
    throw ConfigError("autoguidance needs two checkpoints of the same architecture");
  }
  check_inputs(strong, x, cond);
  const std::vector<double> steps(x.rows(), static_cast<double>(step));
  return combine(strong.predict(x, cond, steps), weak.predict(x, cond, steps), w);
}

Tensor cfg_eps(const NoisePredictor& model, const Tensor& x, const Tensor& cond,
               std::size_t step, double w) {
  if (!model.supports_null_condition()) {
    throw ConfigError("CFG needs a model trained with a null condition");
  }
  Tensor null_cond = Tensor::matrix(cond.rows(), cond.cols());
  for (std::size_t r = 0; r < cond.rows(); ++r) {
    null_cond.row(r)[cond.cols() - 1] = 1.0;
  }
  return paired(model, x, cond, null_cond, step, step, w);
}

Tensor noised_obs_eps(const NoisePredictor& model, const Tensor& x, const Tensor& cond,
                      std::size_t step, double w, double scale,
                      std::span<Rng* const> rngs) {
  if (rngs.size() != cond.rows()) {
    throw ConfigError("noised-observation guidance needs one generator per row");
  }
  const std::size_t obs_cols = cond.cols() - (model.supports_null_condition() ? 1 : 0);
  Tensor neg = cond;
  for (std::size_t r = 0; r < neg.rows(); ++r) {
    auto row = neg.row(r);
    for (std::size_t j = 0; j < obs_cols; ++j) {
      row[j] += scale * rngs[r]->normal();
    }
  }
  return paired(model, x, cond, neg, step, step, w);
}

std::size_t perturbed_timestep(std::size_t step, double scale, double alpha,
                               std::size_t max_step) {
  const double k = static_cast<double>(step);
  const double t = std::round(k + scale * std::pow(k, alpha));
  return static_cast<std::size_t>(std::clamp(t, 1.0, static_cast<double>(max_step)));
}

Tensor timestep_guided_eps(const NoisePredictor& model, const Tensor& x,
                           const Tensor& cond, std::size_t step, double w, double scale,
                           double alpha, std::size_t max_step) {
  return paired(model, x, cond, cond, step,
                perturbed_timestep(step, scale, alpha, max_step), w);
}

GuidedEpsilon::GuidedEpsilon(GuidanceSpec spec, Inputs inputs)
    : spec_(spec), in_(std::move(inputs)) {
  spec_.validate();
  if (in_.model == nullptr) {
    throw ConfigError("guided sampler needs a model");
  }
  switch (spec_.kind) {
    case GuidanceKind::autoguidance:
      if (in_.weak == nullptr) {
        throw ConfigError("autoguidance needs a weak checkpoint");
      }
      break;
    case GuidanceKind::self_guidance:
      numerics::require_same_shape(in_.cond, in_.prev_cond, "self-guidance condition");
      break;
    case GuidanceKind::cfg:
      if (!in_.model->supports_null_condition()) {
        throw ConfigError("CFG needs a model trained with a null condition");
      }
      break;
    case GuidanceKind::noised_obs:
      if (in_.noise_rngs.size() != in_.cond.rows()) {
        throw ConfigError("noised-observation guidance needs one generator per row");
      }
      break;
    case GuidanceKind::timestep:
      if (in_.max_step < 1) {
        throw ConfigError("timestep guidance needs the schedule length");
      }
      break;
    case GuidanceKind::none:
      break;
  }
}

Tensor GuidedEpsilon::epsilon(const Tensor& x, std::size_t step) {
  const NoisePredictor& m = *in_.model;
  switch (spec_.kind) {
    case GuidanceKind::none: {
      check_inputs(m, x, in_.cond);
      const std::vector<double> steps(x.rows(), static_cast<double>(step));
      return m.predict(x, in_.cond, steps);
    }
    case GuidanceKind::cfg:
      return cfg_eps(m, x, in_.cond, step, spec_.w);
    case GuidanceKind::autoguidance:
      return autoguided_eps(m, *in_.weak, x, in_.cond, step, spec_.w);
    case GuidanceKind::self_guidance:
      return self_guided_eps(m, x, in_.cond, in_.prev_cond, step, spec_.w);
    case GuidanceKind::noised_obs:
      return noised_obs_eps(m, x, in_.cond, step, spec_.w, spec_.noise_scale,
                            in_.noise_rngs);
    case GuidanceKind::timestep:
      return timestep_guided_eps(m, x, in_.cond, step, spec_.w, spec_.tsg_scale,
                                 spec_.tsg_alpha, in_.max_step);
  }
  throw UsageError("unhandled guidance kind");
}

}  // namespace diffpush::guidance
