#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "diffpush/numerics/autodiff.hpp"
#include "diffpush/numerics/tensor.hpp"

namespace diffpush::numerics {

struct ParamRef {
  std::string name;
  Tensor* tensor;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;

  // Zero moments shaped like `params`.
  static OptimState for_params(std::span<const ParamRef> params,
                               AdamConfig config);
};

// One bias-corrected Adam update. `grads` must list the parameters in the
// same order as `params`. Throws TrainingError naming the first parameter with
// a non-finite gradient (nothing is modified in that case).
void adam_step(std::span<const ParamRef> params, const Gradients& grads,
               OptimState& state);

}  // namespace diffpush::numerics
