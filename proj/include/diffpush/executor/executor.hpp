#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "diffpush/numerics/tensor.hpp"

namespace diffpush::executor {

using numerics::Tensor;
// Chunks are [H x action_dim] in environment action units.
using Chunk = Tensor;
using Action = std::vector<double>;

enum class ExecMode { open_loop, closed_loop, ema, bid, adaptive, streaming };
enum class SimilarityMetric { cosine, l1, l2 };

ExecMode parse_exec_mode(const std::string& name);
std::string to_string(ExecMode mode);
SimilarityMetric parse_metric(const std::string& name);
std::string to_string(SimilarityMetric metric);

struct ExecutorConfig {
  ExecMode mode = ExecMode::closed_loop;
  std::size_t horizon = 16;
  std::size_t action_dim = 2;
  std::size_t action_horizon = 8;  // executed actions per open-loop chunk
  double tau = 0.97;
  SimilarityMetric metric = SimilarityMetric::cosine;
  double lambda = 0.5;
  std::size_t bid_samples = 8;
  std::size_t bid_window = 4;
  bool retain_only = false;  // adaptive: keep the queue without appending

  // Throws ConfigError for out-of-range values.
  void validate() const;
  // Closed loop always executes one action per chunk.
  std::size_t executed_per_chunk() const;
  friend bool operator==(const ExecutorConfig&, const ExecutorConfig&) = default;
};

// Cosine similarity, or L1 / L2 distance. Cosine is 1 when both norms are
// below 1e-8 and 0 when only one is.
double similarity(std::span<const double> a, std::span<const double> b,
                  SimilarityMetric metric);

// Cosine keeps when sim >= tau; distances keep when dist <= tau.
bool keeps_queue(double sim, double tau, SimilarityMetric metric);

struct ChunkRequest {
  std::size_t strong = 0;
  std::size_t weak = 0;
};

struct StepOutcome {
  Action action;
  bool replanned = false;
  double similarity = std::numeric_limits<double>::quiet_NaN();
};

// Single-episode controller. Each environment step is request() followed by
// step() with exactly the requested number of chunks, so callers can batch
// sampling across many executors.
class Executor {
 public:
  explicit Executor(ExecutorConfig config);

  ChunkRequest request() const;
  StepOutcome step(std::span<const Chunk> strong, std::span<const Chunk> weak = {});

  const ExecutorConfig& config() const { return config_; }
  std::size_t steps() const { return steps_; }
  std::size_t replans() const { return replans_; }
  std::size_t strong_samples() const { return strong_samples_; }
  std::size_t weak_samples() const { return weak_samples_; }
  const std::deque<Action>& queue() const { return queue_; }

 private:
  void check_chunk(const Chunk& c) const;
  void load_queue(const Chunk& c, std::size_t count);
  StepOutcome step_queue(const Chunk& fresh);
  StepOutcome step_adaptive(const Chunk& fresh);
  StepOutcome step_ema(const Chunk& fresh);
  StepOutcome step_bid(std::span<const Chunk> strong, std::span<const Chunk> weak);
  Action pop();

  ExecutorConfig config_;
  std::deque<Action> queue_;
  std::optional<Chunk> previous_;  // EMA blend or BID selection
  std::size_t steps_ = 0;
  std::size_t replans_ = 0;
  std::size_t strong_samples_ = 0;
  std::size_t weak_samples_ = 0;
};

// Draws chunks for the current observation of one episode.
class ChunkSource {
 public:
  virtual ~ChunkSource() = default;
  virtual std::vector<Chunk> sample(std::size_t count) = 0;
};

// request(), sample from the sources, step().
StepOutcome run_step(Executor& executor, ChunkSource& strong, ChunkSource* weak = nullptr);

struct TraceRow {
  std::size_t step = 0;
  bool replanned = false;
  double similarity = 0.0;
  Action action;
};

// "# config_hash=<hex>" then step,replanned,similarity,a0,a1,...
void write_trace_csv(std::ostream& out, std::span<const TraceRow> rows,
                     std::uint64_t config_hash);

}  // namespace diffpush::executor
