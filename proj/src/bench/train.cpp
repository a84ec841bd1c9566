#include "diffpush/bench/train.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <ostream>

#include "diffpush/binary_io.hpp"
#include "diffpush/diffusion/denoiser.hpp"
#include "diffpush/diffusion/training.hpp"
#include "diffpush/errors.hpp"
#include "diffpush/numerics/adam.hpp"

namespace diffpush::bench {

using numerics::Tensor;

namespace {

constexpr std::size_t kHeldRows = 2048;

Tensor conditions(const numerics::DenoiserArch& arch, const Tensor& windows) {
  Tensor cond = Tensor::matrix(windows.rows(), arch.cond_dim());
  for (std::size_t r = 0; r < windows.rows(); ++r) {
    const Tensor c = diffusion::condition_row(arch, windows.row(r));
    std::copy(c.values().begin(), c.values().end(), cond.row(r).begin());
  }
  return cond;
}

void gather(const Tensor& src, std::span<const std::size_t> idx, Tensor& dst) {
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto row = src.row(idx[i]);
    std::copy(row.begin(), row.end(), dst.row(i).begin());
  }
}

std::vector<double> json_vec(const Json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) {
    throw FormatError(std::string("stats missing '") + key + "'");
  }
  return j.at(key).get<std::vector<double>>();
}

}  // namespace

double learning_rate(const TrainingConfig& c, std::size_t step) {
  if (c.warmup > 0 && step <= c.warmup) {
    return c.lr * static_cast<double>(step) / static_cast<double>(c.warmup);
  }
  const double span = static_cast<double>(c.steps - std::min(c.warmup, c.steps));
  const double t = span > 0 ? static_cast<double>(step - c.warmup) / span : 1.0;
  return c.lr_min + 0.5 * (c.lr - c.lr_min) * (1.0 + std::cos(std::numbers::pi * t));
}

TrainResult train_models(const ExperimentConfig& config, const env::DemoSet& demos,
                         const std::function<void(const LossPoint&)>& log) {
  const auto& arch = config.model;
  const auto& tc = config.training;
  if (demos.horizon != arch.horizon || demos.history_len != arch.history_len) {
    throw ConfigError("demonstrations were sliced for a different horizon or history");
  }
  const auto sched =
      diffusion::build_schedule(config.diffusion.schedule, config.diffusion.steps);
  const auto pairs = env::make_training_pairs(demos);
  const Tensor cond = conditions(arch, pairs.windows);
  const std::size_t n = pairs.chunks.rows();
  if (n == 0) {
    throw TrainingError("no training pairs");
  }

  const std::uint64_t root = derive_seed(tc.seed, "training");
  Rng batch_rng(derive_seed(root, "batches"));
  Rng noise_rng(derive_seed(root, "noise"));
  Rng held_pick(derive_seed(root, "held"));
  const std::uint64_t held_noise = derive_seed(root, "held_noise");

  const std::size_t held_rows = std::min(kHeldRows, n);
  std::vector<std::size_t> held_idx(held_rows);
  for (auto& i : held_idx) {
    i = static_cast<std::size_t>(held_pick.uniform_int(0, static_cast<std::int64_t>(n) - 1));
  }
  Tensor held_chunks = Tensor::matrix(held_rows, arch.chunk_dim());
  Tensor held_cond = Tensor::matrix(held_rows, arch.cond_dim());
  gather(pairs.chunks, held_idx, held_chunks);
  gather(cond, held_idx, held_cond);
  auto held_loss = [&](const numerics::DenoiserParams& p) {
    diffusion::MlpDenoiser model(p);
    Rng rng(held_noise);
    return diffusion::loss_value(model, arch, held_chunks, held_cond, sched, rng);
  };

  TrainResult out;
  out.final_params = numerics::DenoiserParams::initialize(arch, config.init_seed);
  out.weak_step = static_cast<std::size_t>(
      std::llround(tc.weak_fraction * static_cast<double>(tc.steps)));
  out.initial_loss = held_loss(out.final_params);
  if (out.weak_step == 0) {
    out.weak_params = out.final_params;
  }
  // Raw weights are optimized; the saved weights are their moving average.
  numerics::DenoiserParams raw = out.final_params;
  auto refs = raw.parameters();
  auto avg = out.final_params.parameters();
  auto state = numerics::OptimState::for_params(refs, {tc.lr});

  std::vector<std::size_t> idx(tc.batch_size);
  Tensor chunks = Tensor::matrix(tc.batch_size, arch.chunk_dim());
  Tensor batch_cond = Tensor::matrix(tc.batch_size, arch.cond_dim());
  double acc = 0.0;
  std::size_t acc_n = 0;
  for (std::size_t step = 1; step <= tc.steps; ++step) {
    for (auto& i : idx) {
      i = static_cast<std::size_t>(batch_rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
    }
    gather(pairs.chunks, idx, chunks);
    gather(cond, idx, batch_cond);
    const auto res = diffusion::training_loss(raw, chunks, batch_cond, sched,
                                              noise_rng, tc.cond_dropout);
    state.config.lr = learning_rate(tc, step);
    numerics::adam_step(refs, res.grads, state);
    // Decay ramps from 0.1 toward ema_decay.
    const double decay =
        std::min(tc.ema_decay, (1.0 + static_cast<double>(step)) / (10.0 + static_cast<double>(step)));
    for (std::size_t p = 0; p < refs.size(); ++p) {
      auto dst = avg[p].tensor->values();
      const auto src = refs[p].tensor->values();
      for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] = decay * dst[i] + (1.0 - decay) * src[i];
      }
    }
    acc += res.loss;
    ++acc_n;
    if (step == out.weak_step) {
      out.weak_params = out.final_params;
    }
    if (step % tc.log_every == 0 || step == tc.steps) {
      LossPoint pt{step, state.config.lr, acc / static_cast<double>(acc_n),
                   held_loss(out.final_params)};
      out.curve.push_back(pt);
      if (log) {
        log(pt);
      }
      acc = 0.0;
      acc_n = 0;
    }
  }
  out.final_loss = out.curve.empty() ? out.initial_loss : out.curve.back().held_loss;
  return out;
}

void write_loss_csv(std::ostream& out, const std::vector<LossPoint>& curve,
                    std::uint64_t config_hash) {
  out << "# config_hash=" << hex_hash(config_hash) << "\n";
  out << "step,lr,train_loss,held_loss\n";
  char buf[128];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", p.step, p.lr, p.train_loss,
                  p.held_loss);
    out << buf;
  }
}

Json stats_to_json(const env::NormStats& s) {
  return Json{{"obs_mean", s.obs_mean},
              {"obs_std", s.obs_std},
              {"act_mean", s.act_mean},
              {"act_std", s.act_std}};
}

env::NormStats stats_from_json(const Json& j) {
  env::NormStats s;
  s.obs_mean = json_vec(j, "obs_mean");
  s.obs_std = json_vec(j, "obs_std");
  s.act_mean = json_vec(j, "act_mean");
  s.act_std = json_vec(j, "act_std");
  if (s.obs_mean.size() != env::kObsDim || s.obs_std.size() != env::kObsDim ||
      s.act_mean.size() != env::kActionDim || s.act_std.size() != env::kActionDim) {
    throw FormatError("stats have the wrong dimensions");
  }
  return s;
}

void save_models(const std::string& dir, const ExperimentConfig& config,
                 const TrainResult& result, const env::NormStats& stats) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const auto h = config.hash();
  numerics::save_checkpoint((fs::path(dir) / "final.chkf").string(), result.final_params, h);
  numerics::save_checkpoint((fs::path(dir) / "weak.chkf").string(), result.weak_params, h);
  Json s = stats_to_json(stats);
  s["config_hash"] = hex_hash(h);
  binary::write_file((fs::path(dir) / "stats.json").string(), s.dump(2) + "\n");
  std::ofstream loss(fs::path(dir) / "loss.csv");
  write_loss_csv(loss, result.curve, h);
  binary::write_file((fs::path(dir) / "config.json").string(), config.to_json().dump(2) + "\n");
}

ModelBundle load_models(const std::string& dir, const ExperimentConfig& config) {
  namespace fs = std::filesystem;
  auto strong = numerics::load_checkpoint((fs::path(dir) / "final.chkf").string());
  auto weak = numerics::load_checkpoint((fs::path(dir) / "weak.chkf").string());
  for (const auto* c : {&strong, &weak}) {
    if (!(c->params.arch == config.model)) {
      throw ConfigError("checkpoint architecture does not match the config model");
    }
  }
  const Json s = Json::parse(binary::read_file((fs::path(dir) / "stats.json").string()));
  return {std::move(strong.params), std::move(weak.params), stats_from_json(s),
          diffusion::build_schedule(config.diffusion.schedule, config.diffusion.steps)};
}

}  // namespace diffpush::bench
