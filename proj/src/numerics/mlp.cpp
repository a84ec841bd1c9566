#include "diffpush/numerics/mlp.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "diffpush/binary_io.hpp"
#include "diffpush/errors.hpp"
#include "diffpush/numerics/kernels.hpp"

namespace diffpush::numerics {
namespace {

std::vector<std::size_t> layer_widths(const DenoiserArch& arch) {
  std::vector<std::size_t> widths{arch.input_dim()};
  for (auto h : arch.hidden) {
    widths.push_back(h);
  }
  widths.push_back(arch.chunk_dim());
  return widths;
}

}  // namespace

void DenoiserArch::validate() const {
  if (horizon == 0 || action_dim == 0 || obs_dim == 0 || history_len == 0) {
    throw ConfigError("denoiser: horizon, action_dim, obs_dim and history_len must be positive");
  }
  if (time_embed_dim == 0 || time_embed_dim % 2 != 0) {
    throw ConfigError("denoiser: time_embed_dim must be even and positive");
  }
  for (auto h : hidden) {
    if (h == 0) {
      throw ConfigError("denoiser: hidden widths must be positive");
    }
  }
}

DenoiserParams DenoiserParams::initialize(const DenoiserArch& arch,
                                          std::uint64_t seed) {
  arch.validate();
  DenoiserParams p;
  p.arch = arch;
  std::mt19937_64 gen(seed);
  const auto widths = layer_widths(arch);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(widths[l]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Linear layer{Tensor::matrix(widths[l], widths[l + 1]),
                 Tensor({widths[l + 1]}, 0.0)};
    for (double& v : layer.weight.values()) {
      v = dist(gen);
    }
    for (double& v : layer.bias.values()) {
      v = dist(gen);
    }
    p.layers.push_back(std::move(layer));
  }
  return p;
}

DenoiserParams DenoiserParams::zeros(const DenoiserArch& arch) {
  arch.validate();
  DenoiserParams p;
  p.arch = arch;
  const auto widths = layer_widths(arch);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    p.layers.push_back({Tensor::matrix(widths[l], widths[l + 1]),
                        Tensor({widths[l + 1]}, 0.0)});
  }
  return p;
}

std::vector<ParamRef> DenoiserParams::parameters() {
  std::vector<ParamRef> refs;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    refs.push_back({"layer" + std::to_string(l) + ".weight", &layers[l].weight});
    refs.push_back({"layer" + std::to_string(l) + ".bias", &layers[l].bias});
  }
  return refs;
}

std::size_t DenoiserParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) {
    n += l.weight.size() + l.bias.size();
  }
  return n;
}

Tensor time_embedding(double step, std::size_t dim) {
  if (dim == 0 || dim % 2 != 0) {
    throw ConfigError("time embedding width must be even and positive");
  }
  const std::size_t half = dim / 2;
  Tensor out({dim});
  for (std::size_t i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) /
                                 static_cast<double>(half));
    out[i] = std::sin(step * freq);
    out[half + i] = std::cos(step * freq);
  }
  return out;
}

Tensor assemble_input(const DenoiserArch& arch, const Tensor& noisy,
                      const Tensor& cond, std::span<const double> steps) {
  const std::size_t rows = noisy.rows();
  if (noisy.cols() != arch.chunk_dim() || cond.cols() != arch.cond_dim() ||
      cond.rows() != rows || steps.size() != rows) {
    throw ConfigError("denoiser input mismatch: noisy " + noisy.shape_string() +
                      " cond " + cond.shape_string() + " steps " +
                      std::to_string(steps.size()) + " (expects chunk " +
                      std::to_string(arch.chunk_dim()) + ", cond " +
                      std::to_string(arch.cond_dim()) + ")");
  }
  const std::size_t width = arch.input_dim();
  Tensor input = Tensor::matrix(rows, width);
  Tensor emb;
  double emb_step = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    auto dst = input.row(r);
    auto x = noisy.row(r);
    auto c = cond.row(r);
    std::copy(x.begin(), x.end(), dst.begin());
    std::copy(c.begin(), c.end(), dst.begin() + x.size());
    if (emb.empty() || steps[r] != emb_step) {
      emb = time_embedding(steps[r], arch.time_embed_dim);
      emb_step = steps[r];
    }
    std::copy(emb.values().begin(), emb.values().end(),
              dst.begin() + x.size() + c.size());
  }
  return input;
}

Tensor mlp_forward(const DenoiserParams& params, const Tensor& noisy,
                   const Tensor& cond, std::span<const double> steps) {
  Tensor h = assemble_input(params.arch, noisy, cond, steps);
  Tensor next;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    kernels::affine(h, params.layers[l].weight, params.layers[l].bias, next);
    if (l + 1 < params.layers.size()) {
      kernels::gated_linear(next.values(), next.values());
    }
    std::swap(h, next);
  }
  return h;
}

Tensor mlp_forward(const DenoiserParams& params, std::span<const double> noisy,
                   std::span<const double> cond, double step) {
  Tensor x({1, noisy.size()}, std::vector<double>(noisy.begin(), noisy.end()));
  Tensor c({1, cond.size()}, std::vector<double>(cond.begin(), cond.end()));
  const double steps[1] = {step};
  Tensor out = mlp_forward(params, x, c, steps);
  return Tensor({out.size()}, std::vector<double>(out.values().begin(), out.values().end()));
}

Var mlp_forward(Tape& tape, const DenoiserParams& params, const Tensor& input) {
  Var h = tape.constant(input);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    Var w = tape.parameter("layer" + std::to_string(l) + ".weight",
                           params.layers[l].weight);
    Var b = tape.parameter("layer" + std::to_string(l) + ".bias",
                           params.layers[l].bias);
    h = tape.affine(h, w, b);
    if (l + 1 < params.layers.size()) {
      h = tape.gated_linear(h);
    }
  }
  return h;
}

std::string encode_checkpoint(const DenoiserParams& params,
                              std::uint64_t config_hash) {
  binary::Writer w;
  w.magic("CHKF");
  w.u32(kCheckpointVersion);
  w.u64(config_hash);
  const DenoiserArch& a = params.arch;
  w.u32(a.horizon);
  w.u32(a.action_dim);
  w.u32(a.obs_dim);
  w.u32(a.history_len);
  w.u32(a.null_token ? 1 : 0);
  w.u32(a.time_embed_dim);
  w.u32(static_cast<std::uint32_t>(a.hidden.size()));
  for (auto h : a.hidden) {
    w.u32(h);
  }
  for (const auto& layer : params.layers) {
    for (double v : layer.weight.values()) {
      w.f64(v);
    }
    for (double v : layer.bias.values()) {
      w.f64(v);
    }
  }
  return w.take();
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  binary::Reader r(bytes);
  r.expect_magic("CHKF");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.config_hash = r.u64();
  DenoiserArch a;
  a.horizon = r.u32();
  a.action_dim = r.u32();
  a.obs_dim = r.u32();
  a.history_len = r.u32();
  a.null_token = r.u32() != 0;
  a.time_embed_dim = r.u32();
  const std::uint32_t depth = r.u32();
  if (depth > 64) {
    throw FormatError("implausible hidden layer count " + std::to_string(depth));
  }
  a.hidden.resize(depth);
  for (auto& h : a.hidden) {
    h = r.u32();
  }
  try {
    a.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint architecture: ") + e.what());
  }
  ck.params = DenoiserParams::zeros(a);
  if (r.remaining() != ck.params.parameter_count() * 8) {
    throw FormatError("checkpoint payload has " + std::to_string(r.remaining()) +
                      " bytes, expected " +
                      std::to_string(ck.params.parameter_count() * 8));
  }
  for (auto& layer : ck.params.layers) {
    for (double& v : layer.weight.values()) {
      v = r.f64();
    }
    for (double& v : layer.bias.values()) {
      v = r.f64();
    }
  }
  return ck;
}

void save_checkpoint(const std::string& path, const DenoiserParams& params,
                     std::uint64_t config_hash) {
  binary::write_file(path, encode_checkpoint(params, config_hash));
}

Checkpoint load_checkpoint(const std::string& path) {
  return decode_checkpoint(binary::read_file(path));
}

}  // namespace diffpush::numerics
