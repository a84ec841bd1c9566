#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "diffpush/env/expert.hpp"
#include "diffpush/env/push_env.hpp"
#include "diffpush/numerics/tensor.hpp"

namespace diffpush::env {

// Per-dimension z-score statistics. Degenerate dimensions get unit scale.
struct NormStats {
  std::vector<double> obs_mean, obs_std;
  std::vector<double> act_mean, act_std;

  double norm_obs(double v, std::size_t dim) const {
    return (v - obs_mean[dim]) / obs_std[dim];
  }
  double norm_act(double v, std::size_t dim) const {
    return (v - act_mean[dim]) / act_std[dim];
  }
  double denorm_act(double v, std::size_t dim) const {
    return v * act_std[dim] + act_mean[dim];
  }
  friend bool operator==(const NormStats&, const NormStats&) = default;
};

struct EpisodeRecord {
  std::uint64_t seed = 0;
  std::int32_t side = 1;
  std::vector<Observation> observations;  // o_0 .. o_{T-1}
  std::vector<Vec2> actions;              // a_t taken after observing o_t
  friend bool operator==(const EpisodeRecord&, const EpisodeRecord&) = default;
};

struct DemoSet {
  std::uint32_t horizon = 16;
  std::uint32_t history_len = 2;
  std::uint64_t config_hash = 0;
  NormStats stats;
  std::vector<EpisodeRecord> episodes;
  friend bool operator==(const DemoSet&, const DemoSet&) = default;
};

struct DatasetConfig {
  std::size_t num_episodes = 300;
  std::uint64_t seed = 0;
  std::uint32_t horizon = 16;
  std::uint32_t history_len = 2;
  // Generation fails when more than this many attempts are needed.
  double max_attempt_factor = 2.0;
  // Std of Gaussian noise added to the executed action; the recorded label
  // stays the clean expert action.
  double action_noise = 0.3;
};

// Rolls the expert at P = 0 over seeded episodes, keeping successes only.
// Throws GenerationError when too few succeed.
DemoSet generate_dataset(const DatasetConfig& config, const EnvConfig& env,
                         const ExpertConfig& expert = {});

// Side preference and episode seed for attempt `index`.
std::uint64_t demo_episode_seed(std::uint64_t dataset_seed, std::size_t index);
std::int32_t demo_episode_side(std::uint64_t episode_seed);

NormStats compute_stats(std::span<const EpisodeRecord> episodes);

// One row per (episode, step): normalized flattened observation window and
// normalized H-step action chunk, trailing chunks padded with the final
// action.
struct TrainingPairs {
  numerics::Tensor windows;
  numerics::Tensor chunks;
};
TrainingPairs make_training_pairs(const DemoSet& demos);

// "DEMO", u32 version, u64 config hash, u32 obs_dim, action_dim, horizon,
// history_len, normalization stats as f64 (obs mean, obs std, action mean,
// action std), u64 episode count, then per episode u64 seed, i32 side, u32
// length and `length` rows of obs_dim + action_dim f64 values.
inline constexpr std::uint32_t kDemoVersion = 1;
std::string encode_demos(const DemoSet& demos);
DemoSet decode_demos(std::string_view bytes);
void save_demos(const std::string& path, const DemoSet& demos);
DemoSet load_demos(const std::string& path);

}  // namespace diffpush::env
