#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "diffpush/diffusion/schedule.hpp"
#include "diffpush/env/dataset.hpp"
#include "diffpush/env/push_env.hpp"
#include "diffpush/executor/executor.hpp"
#include "diffpush/guidance/guidance.hpp"
#include "diffpush/numerics/mlp.hpp"

namespace diffpush::bench {

using Json = nlohmann::json;

enum class Solver { ddim, ddpm };
enum class PolicyKind { diffusion, weak, expert };

struct DiffusionConfig {
  std::size_t steps = 100;
  diffusion::ScheduleKind schedule = diffusion::ScheduleKind::squared_cosine;
  Solver solver = Solver::ddim;
  std::size_t inference_steps = 30;
  bool clip_x0 = true;
};

struct TrainingConfig {
  std::size_t steps = 40000;
  std::size_t batch_size = 256;
  double lr = 3e-3;
  double lr_min = 1e-5;        // cosine decay floor
  std::size_t warmup = 500;
  std::uint64_t seed = 0;
  double cond_dropout = 0.1;
  double weak_fraction = 0.25;
  std::size_t log_every = 100;
  double ema_decay = 0.999;  // 0 saves the raw weights
};

// A named evaluation entry: the base guidance/executor/solver with the
// method's overrides applied.
struct MethodSpec {
  std::string name;
  PolicyKind policy = PolicyKind::diffusion;
  guidance::GuidanceSpec guidance;
  executor::ExecutorConfig executor;
  Solver solver = Solver::ddim;
  std::size_t inference_steps = 30;
};

struct Threshold {
  std::string method;
  double p = 0.0;
  std::string metric = "coverage";  // coverage | success
  std::optional<double> min;
  std::optional<double> max;
};

struct EvaluationConfig {
  std::size_t num_episodes = 100;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::vector<double> p_values{0.0, 0.01};
  std::vector<Json> methods;  // raw overrides, resolved by resolve_methods
  std::vector<Threshold> thresholds;
  bool write_traces = false;
};

struct ExperimentConfig {
  env::EnvConfig env;
  env::PerturbationKind perturbation = env::PerturbationKind::block_drift;
  env::DatasetConfig dataset;
  numerics::DenoiserArch model;
  std::uint64_t init_seed = 0;
  DiffusionConfig diffusion;
  TrainingConfig training;
  guidance::GuidanceSpec guidance;
  executor::ExecutorConfig executor;
  EvaluationConfig evaluation;

  // Throws ConfigError for unknown keys, wrong types or invalid values.
  static ExperimentConfig from_json(const Json& j);
  static ExperimentConfig load(const std::string& path);
  Json to_json() const;
  // FNV-1a of the canonical resolved JSON text.
  std::uint64_t hash() const;
  void validate() const;

  // Every entry of evaluation.methods applied over the base settings; with no
  // entries, the base alone under the name "default".
  std::vector<MethodSpec> resolve_methods() const;
  MethodSpec resolve_method(const Json& overrides) const;
};

std::string hex_hash(std::uint64_t h);

std::string to_string(Solver s);
std::string to_string(PolicyKind p);

}  // namespace diffpush::bench
