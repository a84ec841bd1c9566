#include "diffpush/diffusion/training.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "diffpush/errors.hpp"

namespace diffpush::diffusion {

NoisyChunk forward_noise(std::span<const double> chunk, std::size_t step,
                         std::span<const double> noise, const NoiseSchedule& schedule) {
  if (chunk.size() != noise.size()) {
    throw ConfigError("forward_noise: chunk has " + std::to_string(chunk.size()) +
                      " values, noise has " + std::to_string(noise.size()));
  }
  if (step < 1 || step > schedule.steps()) {
    throw ConfigError("forward_noise: step " + std::to_string(step) + " outside [1, " +
                      std::to_string(schedule.steps()) + "]");
  }
  const double signal = std::sqrt(schedule.alpha_bar(step));
  const double sigma = std::sqrt(1.0 - schedule.alpha_bar(step));
  NoisyChunk out{Tensor({chunk.size()}), step};
  for (std::size_t i = 0; i < chunk.size(); ++i) {
    out.values[i] = signal * chunk[i] + sigma * noise[i];
  }
  return out;
}

NoisingDraw draw_noising(const numerics::DenoiserArch& arch, const Tensor& chunks,
                         const Tensor& cond, const NoiseSchedule& schedule, Rng& rng,
                         double cond_dropout) {
  const std::size_t rows = chunks.rows();
  if (rows == 0 || chunks.empty()) {
    throw ConfigError("training batch is empty");
  }
  if (chunks.cols() != arch.chunk_dim() || cond.rows() != rows ||
      cond.cols() != arch.cond_dim()) {
    throw ConfigError("training batch shape " + chunks.shape_string() + " / " +
                      cond.shape_string() + " does not match the architecture");
  }
  if (cond_dropout > 0.0 && !arch.null_token) {
    throw ConfigError("condition dropout needs a null-condition flag");
  }
  const std::size_t dim = arch.chunk_dim();
  NoisingDraw d{Tensor::matrix(rows, dim), Tensor::matrix(rows, dim), cond, {}};
  d.steps.resize(rows);
  const auto max_step = static_cast<std::int64_t>(schedule.steps());
  for (std::size_t r = 0; r < rows; ++r) {
    const auto k = static_cast<std::size_t>(rng.uniform_int(1, max_step));
    d.steps[r] = static_cast<double>(k);
    const double signal = std::sqrt(schedule.alpha_bar(k));
    const double sigma = std::sqrt(1.0 - schedule.alpha_bar(k));
    auto x0 = chunks.row(r);
    auto eps = d.noise.row(r);
    auto xk = d.noisy.row(r);
    for (std::size_t j = 0; j < dim; ++j) {
      eps[j] = rng.normal();
      xk[j] = signal * x0[j] + sigma * eps[j];
    }
    if (cond_dropout > 0.0 && rng.bernoulli(cond_dropout)) {
      auto c = d.cond.row(r);
      std::fill(c.begin(), c.end(), 0.0);
      c[c.size() - 1] = 1.0;
    }
  }
  return d;
}

LossResult training_loss(const numerics::DenoiserParams& params, const Tensor& chunks,
                         const Tensor& cond, const NoiseSchedule& schedule, Rng& rng,
                         double cond_dropout) {
  NoisingDraw d = draw_noising(params.arch, chunks, cond, schedule, rng, cond_dropout);
  numerics::Tape tape;
  const Tensor input = numerics::assemble_input(params.arch, d.noisy, d.cond, d.steps);
  numerics::Var pred = numerics::mlp_forward(tape, params, input);
  numerics::Var loss = tape.mean_row_sq_error(pred, tape.constant(std::move(d.noise)));
  const double value = loss.value()[0];
  if (!std::isfinite(value)) {
    throw TrainingError("non-finite training loss");
  }
  return {value, tape.backward(loss)};
}

double loss_value(const NoisePredictor& predictor, const numerics::DenoiserArch& arch,
                  const Tensor& chunks, const Tensor& cond,
                  const NoiseSchedule& schedule, Rng& rng, double cond_dropout) {
  const NoisingDraw d = draw_noising(arch, chunks, cond, schedule, rng, cond_dropout);
  const Tensor pred = predictor.predict(d.noisy, d.cond, d.steps);
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = d.noise[i] - pred[i];
    total += e * e;
  }
  const double value = total / static_cast<double>(chunks.rows());
  if (!std::isfinite(value)) {
    throw TrainingError("non-finite training loss");
  }
  return value;
}

}  // namespace diffpush::diffusion
