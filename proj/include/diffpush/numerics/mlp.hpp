#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "diffpush/numerics/adam.hpp"
#include "diffpush/numerics/autodiff.hpp"
#include "diffpush/numerics/tensor.hpp"

namespace diffpush::numerics {

// Shape of the conditional noise-prediction MLP. The network input is the
// concatenation [noisy chunk | condition | time embedding]; the condition is
// the flattened observation window followed, when `null_token` is set, by one
// flag that marks the unconditional query.
struct DenoiserArch {
  std::uint32_t horizon = 16;
  std::uint32_t action_dim = 2;
  std::uint32_t obs_dim = 6;
  std::uint32_t history_len = 2;
  bool null_token = true;
  std::uint32_t time_embed_dim = 32;
  std::vector<std::uint32_t> hidden{256, 256, 256};

  std::size_t chunk_dim() const { return std::size_t{horizon} * action_dim; }
  std::size_t window_dim() const { return std::size_t{obs_dim} * history_len; }
  std::size_t cond_dim() const { return window_dim() + (null_token ? 1 : 0); }
  std::size_t input_dim() const { return chunk_dim() + cond_dim() + time_embed_dim; }

  // Throws ConfigError for zero sizes or an odd embedding width.
  void validate() const;

  friend bool operator==(const DenoiserArch&, const DenoiserArch&) = default;
};

struct Linear {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]
};

struct DenoiserParams {
  DenoiserArch arch;
  std::vector<Linear> layers;

  // Weights and biases uniform in +-1/sqrt(fan_in), drawn in declaration
  // order from a generator seeded with `seed`.
  static DenoiserParams initialize(const DenoiserArch& arch, std::uint64_t seed);
  static DenoiserParams zeros(const DenoiserArch& arch);

  // "layer{i}.weight", "layer{i}.bias" in declaration order.
  std::vector<ParamRef> parameters();
  std::size_t parameter_count() const;
};

// Sinusoidal embedding: first half sin(k f_i), second half cos(k f_i) with
// f_i = 10000^(-i / (dim/2)). Entries lie in [-1, 1].
Tensor time_embedding(double step, std::size_t dim);

// Rows of [noisy | cond | time_embedding(step)].
Tensor assemble_input(const DenoiserArch& arch, const Tensor& noisy,
                      const Tensor& cond, std::span<const double> steps);

// Batched prediction: noisy [B x chunk_dim], cond [B x cond_dim], one step per
// row. Returns [B x chunk_dim]. Pure function of its arguments.
Tensor mlp_forward(const DenoiserParams& params, const Tensor& noisy,
                   const Tensor& cond, std::span<const double> steps);

// Single-item convenience overload.
Tensor mlp_forward(const DenoiserParams& params, std::span<const double> noisy,
                   std::span<const double> cond, double step);

// Records the network on `tape`, registering every weight as a parameter.
Var mlp_forward(Tape& tape, const DenoiserParams& params, const Tensor& input);

// Checkpoint codec: "CHKF", u32 version, u64 config hash, architecture as
// u32 values, then every parameter as little-endian f64 in declaration order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  DenoiserParams params;
  std::uint64_t config_hash = 0;
};

std::string encode_checkpoint(const DenoiserParams& params,
                              std::uint64_t config_hash);
Checkpoint decode_checkpoint(std::string_view bytes);
void save_checkpoint(const std::string& path, const DenoiserParams& params,
                     std::uint64_t config_hash);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace diffpush::numerics
