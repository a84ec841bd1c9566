#pragma once

#include <atomic>
#include <cstddef>
#include <span>

#include "diffpush/numerics/mlp.hpp"
#include "diffpush/numerics/tensor.hpp"

namespace diffpush::diffusion {

using numerics::Tensor;

// epsilon(noisy chunk, condition, diffusion step), batched over rows.
class NoisePredictor {
 public:
  virtual ~NoisePredictor() = default;

  virtual std::size_t chunk_dim() const = 0;
  virtual std::size_t cond_dim() const = 0;
  // False when the model has no reserved unconditional query.
  virtual bool supports_null_condition() const { return false; }

  // noisy [B x chunk_dim], cond [B x cond_dim], one step per row.
  virtual Tensor predict(const Tensor& noisy, const Tensor& cond,
                         std::span<const double> steps) const = 0;
};

class MlpDenoiser final : public NoisePredictor {
 public:
  explicit MlpDenoiser(const numerics::DenoiserParams& params) : params_(&params) {}

  std::size_t chunk_dim() const override { return params_->arch.chunk_dim(); }
  std::size_t cond_dim() const override { return params_->arch.cond_dim(); }
  bool supports_null_condition() const override { return params_->arch.null_token; }
  Tensor predict(const Tensor& noisy, const Tensor& cond,
                 std::span<const double> steps) const override {
    return numerics::mlp_forward(*params_, noisy, cond, steps);
  }

  const numerics::DenoiserParams& params() const { return *params_; }

 private:
  const numerics::DenoiserParams* params_;
};

// Forwards to another predictor while counting invocations and rows.
class CountingPredictor final : public NoisePredictor {
 public:
  explicit CountingPredictor(const NoisePredictor& inner) : inner_(&inner) {}

  std::size_t chunk_dim() const override { return inner_->chunk_dim(); }
  std::size_t cond_dim() const override { return inner_->cond_dim(); }
  bool supports_null_condition() const override {
    return inner_->supports_null_condition();
  }
  Tensor predict(const Tensor& noisy, const Tensor& cond,
                 std::span<const double> steps) const override {
    calls_.fetch_add(1, std::memory_order_relaxed);
    rows_.fetch_add(noisy.rows(), std::memory_order_relaxed);
    return inner_->predict(noisy, cond, steps);
  }

  std::size_t calls() const { return calls_.load(); }
  std::size_t rows() const { return rows_.load(); }
  void reset() {
    calls_ = 0;
    rows_ = 0;
  }

 private:
  const NoisePredictor* inner_;
  mutable std::atomic<std::size_t> calls_{0};
  mutable std::atomic<std::size_t> rows_{0};
};

// Condition row for a flattened observation window: [window | 0] when the
// architecture reserves a null flag, otherwise just the window.
Tensor condition_row(const numerics::DenoiserArch& arch,
                     std::span<const double> window);
// The unconditional query: zeros with the null flag set.
Tensor null_condition_row(const numerics::DenoiserArch& arch);

}  // namespace diffpush::diffusion
