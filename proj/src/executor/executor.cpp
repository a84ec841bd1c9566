#include "diffpush/executor/executor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "diffpush/errors.hpp"

namespace diffpush::executor {

namespace {

constexpr double kTinyNorm = 1e-8;

double mean_sq_distance(const Chunk& a, const Chunk& b, std::size_t rows_a_offset,
                        std::size_t rows_b_offset, std::size_t rows) {
  const std::size_t cols = a.cols();
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    const auto ra = a.row(rows_a_offset + i);
    const auto rb = b.row(rows_b_offset + i);
    for (std::size_t j = 0; j < cols; ++j) {
      const double d = ra[j] - rb[j];
      total += d * d;
    }
  }
  return total / static_cast<double>(rows * cols);
}

Action row_of(const Chunk& c, std::size_t r) {
  const auto row = c.row(r);
  return Action(row.begin(), row.end());
}

}  // namespace

ExecMode parse_exec_mode(const std::string& name) {
  for (auto m : {ExecMode::open_loop, ExecMode::closed_loop, ExecMode::ema, ExecMode::bid,
                 ExecMode::adaptive, ExecMode::streaming}) {
    if (to_string(m) == name) {
      return m;
    }
  }
  throw ConfigError("unknown executor mode '" + name + "'");
}

std::string to_string(ExecMode mode) {
  switch (mode) {
    case ExecMode::open_loop: return "open_loop";
    case ExecMode::closed_loop: return "closed_loop";
    case ExecMode::ema: return "ema";
    case ExecMode::bid: return "bid";
    case ExecMode::adaptive: return "adaptive";
    case ExecMode::streaming: return "streaming";
  }
  return "closed_loop";
}

SimilarityMetric parse_metric(const std::string& name) {
  if (name == "cosine") return SimilarityMetric::cosine;
  if (name == "l1") return SimilarityMetric::l1;
  if (name == "l2") return SimilarityMetric::l2;
  throw ConfigError("unknown similarity metric '" + name + "'");
}

std::string to_string(SimilarityMetric metric) {
  switch (metric) {
    case SimilarityMetric::cosine: return "cosine";
    case SimilarityMetric::l1: return "l1";
    case SimilarityMetric::l2: return "l2";
  }
  return "cosine";
}

void ExecutorConfig::validate() const {
  if (horizon == 0 || action_dim == 0) {
    throw ConfigError("executor horizon and action_dim must be positive");
  }
  if (mode == ExecMode::open_loop && (action_horizon == 0 || action_horizon > horizon)) {
    throw ConfigError("open-loop action_horizon must lie in [1, horizon]");
  }
  if (!std::isfinite(tau) || (metric != SimilarityMetric::cosine && tau < 0.0)) {
    throw ConfigError("similarity threshold must be finite, and >= 0 for distances");
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ConfigError("EMA lambda must lie in [0, 1]");
  }
  if (mode == ExecMode::bid && (bid_samples == 0 || bid_window == 0)) {
    throw ConfigError("BID needs at least one sample and a positive window");
  }
}

std::size_t ExecutorConfig::executed_per_chunk() const {
  return mode == ExecMode::closed_loop ? 1 : action_horizon;
}

double similarity(std::span<const double> a, std::span<const double> b,
                  SimilarityMetric metric) {
  if (a.size() != b.size()) {
    throw ConfigError("similarity needs equal-length actions");
  }
  double dot = 0.0, na = 0.0, nb = 0.0, l1 = 0.0, l2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
    const double d = a[i] - b[i];
    l1 += std::abs(d);
    l2 += d * d;
  }
  switch (metric) {
    case SimilarityMetric::l1:
      return l1;
    case SimilarityMetric::l2:
      return std::sqrt(l2);
    case SimilarityMetric::cosine: {
      na = std::sqrt(na);
      nb = std::sqrt(nb);
      const bool tiny_a = na < kTinyNorm, tiny_b = nb < kTinyNorm;
      if (tiny_a || tiny_b) {
        return tiny_a && tiny_b ? 1.0 : 0.0;
      }
      return std::clamp(dot / (na * nb), -1.0, 1.0);
    }
  }
  return 0.0;
}

bool keeps_queue(double sim, double tau, SimilarityMetric metric) {
  return metric == SimilarityMetric::cosine ? sim >= tau : sim <= tau;
}

Executor::Executor(ExecutorConfig config) : config_(config) { config_.validate(); }

ChunkRequest Executor::request() const {
  switch (config_.mode) {
    case ExecMode::open_loop:
    case ExecMode::closed_loop:
      return {queue_.empty() ? 1u : 0u, 0};
    case ExecMode::bid:
      return {config_.bid_samples, config_.bid_samples};
    case ExecMode::ema:
    case ExecMode::adaptive:
    case ExecMode::streaming:
      return {1, 0};
  }
  return {};
}

void Executor::check_chunk(const Chunk& c) const {
  if (c.rows() != config_.horizon || c.cols() != config_.action_dim || c.rank() != 2) {
    throw ConfigError("chunk shape " + c.shape_string() + " does not match [" +
                      std::to_string(config_.horizon) + ", " +
                      std::to_string(config_.action_dim) + "]");
  }
}

void Executor::load_queue(const Chunk& c, std::size_t count) {
  queue_.clear();
  for (std::size_t i = 0; i < count; ++i) {
    queue_.push_back(row_of(c, i));
  }
}

Action Executor::pop() {
  if (queue_.empty()) {
    throw UsageError("executor queue is empty");
  }
  Action a = std::move(queue_.front());
  queue_.pop_front();
  return a;
}

StepOutcome Executor::step(std::span<const Chunk> strong, std::span<const Chunk> weak) {
  const ChunkRequest need = request();
  if (strong.size() != need.strong || weak.size() != need.weak) {
    throw UsageError("executor expected " + std::to_string(need.strong) + " strong and " +
                     std::to_string(need.weak) + " weak chunks");
  }
  for (const auto& c : strong) {
    check_chunk(c);
  }
  for (const auto& c : weak) {
    check_chunk(c);
  }
  strong_samples_ += strong.size();
  weak_samples_ += weak.size();

  StepOutcome out;
  switch (config_.mode) {
    case ExecMode::open_loop:
    case ExecMode::closed_loop:
      out = step_queue(strong.empty() ? Chunk() : strong[0]);
      break;
    case ExecMode::adaptive:
    case ExecMode::streaming:
      out = step_adaptive(strong[0]);
      break;
    case ExecMode::ema:
      out = step_ema(strong[0]);
      break;
    case ExecMode::bid:
      out = step_bid(strong, weak);
      break;
  }
  ++steps_;
  replans_ += out.replanned ? 1 : 0;
  return out;
}

StepOutcome Executor::step_queue(const Chunk& fresh) {
  StepOutcome out;
  if (queue_.empty()) {
    load_queue(fresh, config_.executed_per_chunk());
    out.replanned = true;
  }
  out.action = pop();
  return out;
}

StepOutcome Executor::step_adaptive(const Chunk& fresh) {
  StepOutcome out;
  bool keep = false;
  if (!queue_.empty()) {
    if (config_.mode == ExecMode::streaming) {
      keep = true;
    } else {
      out.similarity = similarity(queue_.front(), fresh.row(0), config_.metric);
      keep = keeps_queue(out.similarity, config_.tau, config_.metric);
    }
  }
  if (keep) {
    if (!config_.retain_only && queue_.size() < config_.horizon) {
      queue_.push_back(row_of(fresh, config_.horizon - 1));
    }
  } else {
    load_queue(fresh, config_.horizon);
    out.replanned = true;
  }
  out.action = pop();
  return out;
}

StepOutcome Executor::step_ema(const Chunk& fresh) {
  Chunk blended = fresh;
  if (previous_) {
    const std::size_t h = config_.horizon;
    const double lam = config_.lambda;
    for (std::size_t i = 0; i < h; ++i) {
      const auto prev = previous_->row(std::min(i + 1, h - 1));
      const auto f = fresh.row(i);
      auto b = blended.row(i);
      for (std::size_t j = 0; j < b.size(); ++j) {
        b[j] = lam * prev[j] + (1.0 - lam) * f[j];
      }
    }
  }
  StepOutcome out;
  out.action = row_of(blended, 0);
  out.replanned = true;
  previous_ = std::move(blended);
  return out;
}

StepOutcome Executor::step_bid(std::span<const Chunk> strong, std::span<const Chunk> weak) {
  const std::size_t h = config_.horizon;
  const std::size_t window = std::min(config_.bid_window, h - 1);
  std::size_t best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < strong.size(); ++i) {
    double backward = 0.0;
    if (previous_ && window > 0) {
      backward = mean_sq_distance(strong[i], *previous_, 0, 1, window);
    }
    double to_strong = 0.0, to_weak = 0.0;
    for (const auto& s : strong) {
      to_strong += mean_sq_distance(strong[i], s, 0, 0, h);
    }
    for (const auto& w : weak) {
      to_weak += mean_sq_distance(strong[i], w, 0, 0, h);
    }
    const double forward = to_strong / static_cast<double>(strong.size()) -
                           (weak.empty() ? 0.0 : to_weak / static_cast<double>(weak.size()));
    const double score = backward + forward;
    if (score < best_score) {
      best_score = score;
      best = i;
    }
  }
  StepOutcome out;
  out.action = row_of(strong[best], 0);
  out.replanned = true;
  previous_ = strong[best];
  return out;
}

StepOutcome run_step(Executor& executor, ChunkSource& strong, ChunkSource* weak) {
  const ChunkRequest need = executor.request();
  if (need.weak > 0 && weak == nullptr) {
    throw ConfigError("executor needs a weak policy");
  }
  const auto s = need.strong > 0 ? strong.sample(need.strong) : std::vector<Chunk>{};
  const auto w = need.weak > 0 ? weak->sample(need.weak) : std::vector<Chunk>{};
  return executor.step(s, w);
}

void write_trace_csv(std::ostream& out, std::span<const TraceRow> rows,
                     std::uint64_t config_hash) {
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash));
  out << "# config_hash=" << hash << "\n";
  out << "step,replanned,similarity";
  const std::size_t dims = rows.empty() ? 0 : rows[0].action.size();
  for (std::size_t j = 0; j < dims; ++j) {
    out << ",a" << j;
  }
  out << "\n";
  char buf[64];
  for (const auto& r : rows) {
    out << r.step << "," << (r.replanned ? 1 : 0) << ",";
    if (std::isfinite(r.similarity)) {
      std::snprintf(buf, sizeof buf, "%.17g", r.similarity);
      out << buf;
    }
    for (double v : r.action) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << "," << buf;
    }
    out << "\n";
  }
}

}  // namespace diffpush::executor
