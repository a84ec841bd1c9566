#include "diffpush/diffusion/denoiser.hpp"

#include "diffpush/errors.hpp"

namespace diffpush::diffusion {

Tensor condition_row(const numerics::DenoiserArch& arch,
                     std::span<const double> window) {
  if (window.size() != arch.window_dim()) {
    throw ConfigError("observation window has " + std::to_string(window.size()) +
                      " values, model expects " + std::to_string(arch.window_dim()));
  }
  Tensor row({arch.cond_dim()}, 0.0);
  std::copy(window.begin(), window.end(), row.values().begin());
  return row;
}

Tensor null_condition_row(const numerics::DenoiserArch& arch) {
  if (!arch.null_token) {
    throw ConfigError("model was built without a null-condition flag");
  }
  Tensor row({arch.cond_dim()}, 0.0);
  row[arch.cond_dim() - 1] = 1.0;
  return row;
}

}  // namespace diffpush::diffusion
