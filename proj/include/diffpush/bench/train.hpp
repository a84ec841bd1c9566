#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "diffpush/bench/config.hpp"
#include "diffpush/bench/policy.hpp"
#include "diffpush/env/dataset.hpp"
#include "diffpush/numerics/mlp.hpp"

namespace diffpush::bench {

struct LossPoint {
  std::size_t step = 0;
  double lr = 0.0;
  double train_loss = 0.0;  // mean minibatch loss since the previous point
  double held_loss = 0.0;   // fixed batch, fixed draws
};

struct TrainResult {
  numerics::DenoiserParams final_params;
  numerics::DenoiserParams weak_params;
  std::size_t weak_step = 0;
  double initial_loss = 0.0;  // held loss before the first update
  double final_loss = 0.0;    // held loss after the last update
  std::vector<LossPoint> curve;
};

// Linear warmup to lr, then cosine decay to lr_min at the final step.
double learning_rate(const TrainingConfig& config, std::size_t step);

// Adam on the noise-prediction loss with condition dropout. The weak
// checkpoint is the averaged parameters after round(weak_fraction * steps)
// updates.
TrainResult train_models(const ExperimentConfig& config, const env::DemoSet& demos,
                         const std::function<void(const LossPoint&)>& log = {});

void write_loss_csv(std::ostream& out, const std::vector<LossPoint>& curve,
                    std::uint64_t config_hash);

// Model directory layout: final.chkf, weak.chkf, stats.json, loss.csv,
// config.json.
void save_models(const std::string& dir, const ExperimentConfig& config,
                 const TrainResult& result, const env::NormStats& stats);

// Throws ConfigError when the checkpoints do not match the config's
// architecture or were written for a different config.
ModelBundle load_models(const std::string& dir, const ExperimentConfig& config);

Json stats_to_json(const env::NormStats& stats);
env::NormStats stats_from_json(const Json& j);

}  // namespace diffpush::bench
