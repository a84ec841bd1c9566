#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "diffpush/bench/config.hpp"
#include "diffpush/bench/policy.hpp"
#include "diffpush/executor/executor.hpp"

namespace diffpush::bench {

struct EpisodeResult {
  std::string method;
  double p = 0.0;
  std::uint64_t seed = 0;
  std::size_t episode = 0;
  bool success = false;
  double coverage = 0.0;
  std::size_t steps = 0;
  double replan_fraction = 0.0;
  std::size_t invocations = 0;  // chunk samples drawn, strong and weak
};

struct ResultRow {
  std::string method;
  double p = 0.0;
  double coverage_mean = 0.0, coverage_std = 0.0;
  double success_mean = 0.0, success_std = 0.0;
  double invocations_mean = 0.0;
  double steps_mean = 0.0;
  double replan_mean = 0.0;
  std::size_t seeds = 0;
  std::size_t episodes = 0;
};

// Means over seeds of per-seed episode means; std is the sample standard
// deviation of those per-seed means.
struct ResultTable {
  std::vector<ResultRow> rows;
  const ResultRow& at(const std::string& method, double p) const;
};

// Rows in first-appearance order of (method, p).
ResultTable aggregate(const std::vector<EpisodeResult>& episodes);

// Seeds for everything random in one evaluation episode. Independent of the
// method so that comparisons are paired.
struct EpisodeSeeds {
  std::uint64_t env, policy, weak_policy, guidance;
};
EpisodeSeeds episode_seeds(std::uint64_t eval_seed, std::size_t episode);

struct CellSpec {
  MethodSpec method;
  double p = 0.0;
  std::uint64_t seed = 0;
  std::size_t first_episode = 0;
  std::size_t num_episodes = 0;
};

// Optional per-step trace of one episode.
using TraceSink = std::function<void(std::size_t episode, const executor::TraceRow&)>;

// Denoiser work of one cell, counted at the predictor.
struct CellCounters {
  std::size_t predictor_calls = 0;
  std::size_t predictor_rows = 0;
};

// Runs the episodes of one cell in lockstep so all pending chunk requests of
// a step are denoised as a single batch.
std::vector<EpisodeResult> run_cell(const ExperimentConfig& config, const ModelBundle& models,
                                    const CellSpec& cell, const TraceSink& trace = {},
                                    CellCounters* counters = nullptr);

// Every (method, P, seed) cell of the config, run on `workers` threads and
// returned in (method, P, seed, episode) order.
std::vector<EpisodeResult> run_evaluation(const ExperimentConfig& config,
                                          const ModelBundle& models,
                                          const std::vector<MethodSpec>& methods,
                                          std::size_t workers,
                                          const std::function<void(const std::string&)>& log = {});

// DIFFPUSH_WORKERS, defaulting to the hardware concurrency.
std::size_t worker_count();

void write_episodes_csv(std::ostream& out, const std::vector<EpisodeResult>& episodes,
                        std::uint64_t config_hash);
std::vector<EpisodeResult> read_episodes_csv(std::istream& in);
void write_table_csv(std::ostream& out, const ResultTable& table, std::uint64_t config_hash);
void write_table_markdown(std::ostream& out, const ResultTable& table,
                          std::uint64_t config_hash);

struct ThresholdOutcome {
  Threshold threshold;
  double value = 0.0;
  bool pass = false;
};
std::vector<ThresholdOutcome> check_thresholds(const ResultTable& table,
                                               const std::vector<Threshold>& thresholds);

}  // namespace diffpush::bench
