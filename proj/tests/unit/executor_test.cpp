#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "diffpush/errors.hpp"
#include "diffpush/executor/executor.hpp"
#include "diffpush/random.hpp"

namespace diffpush::executor {
namespace {

constexpr std::size_t kH = 16;

// Gaussian chunks from a private stream, like a stochastic policy.
class RandomSource final : public ChunkSource {
 public:
  explicit RandomSource(std::uint64_t seed) : rng_(seed) {}
  std::vector<Chunk> sample(std::size_t count) override {
    std::vector<Chunk> out;
    for (std::size_t i = 0; i < count; ++i) {
      Chunk c = Tensor::matrix(kH, 2);
      for (double& v : c.values()) {
        v = std::clamp(0.3 + 0.2 * rng_.normal(), -1.0, 1.0);
      }
      out.push_back(std::move(c));
      ++calls_;
    }
    return out;
  }
  std::size_t calls() const { return calls_; }

 private:
  Rng rng_;
  std::size_t calls_ = 0;
};

// Chunk k holds values 100 k + row index in both dims.
class CountingSource final : public ChunkSource {
 public:
  std::vector<Chunk> sample(std::size_t count) override {
    std::vector<Chunk> out;
    for (std::size_t i = 0; i < count; ++i, ++k_) {
      Chunk c = Tensor::matrix(kH, 2);
      for (std::size_t r = 0; r < kH; ++r) {
        c.row(r)[0] = c.row(r)[1] = 100.0 * static_cast<double>(k_) + static_cast<double>(r);
      }
      out.push_back(std::move(c));
    }
    return out;
  }

 private:
  std::size_t k_ = 0;
};

Chunk constant_chunk(double a, double b) {
  Chunk c = Tensor::matrix(kH, 2);
  for (std::size_t r = 0; r < kH; ++r) {
    c.row(r)[0] = a;
    c.row(r)[1] = b;
  }
  return c;
}

std::vector<Action> run(ExecutorConfig cfg, std::uint64_t seed, std::size_t steps,
                        std::uint64_t weak_seed = 999) {
  Executor ex(cfg);
  RandomSource strong(seed), weak(weak_seed);
  std::vector<Action> actions;
  for (std::size_t t = 0; t < steps; ++t) {
    actions.push_back(run_step(ex, strong, &weak).action);
  }
  return actions;
}

ExecutorConfig mode(ExecMode m) {
  ExecutorConfig c;
  c.mode = m;
  return c;
}

TEST(SimilarityTest, Examples) {
  const std::vector<double> a{3.0, 4.0}, b{6.0, 8.0}, perp{-4.0, 3.0};
  EXPECT_DOUBLE_EQ(similarity(a, a, SimilarityMetric::cosine), 1.0);
  EXPECT_EQ(similarity(a, a, SimilarityMetric::l1), 0.0);
  EXPECT_EQ(similarity(a, a, SimilarityMetric::l2), 0.0);
  EXPECT_DOUBLE_EQ(similarity(a, b, SimilarityMetric::cosine), 1.0);
  EXPECT_DOUBLE_EQ(similarity(a, b, SimilarityMetric::l2), 5.0);
  EXPECT_DOUBLE_EQ(similarity(a, b, SimilarityMetric::l1), 7.0);
  EXPECT_EQ(similarity(a, perp, SimilarityMetric::cosine), 0.0);
  const std::vector<double> front{1.0, 0.0}, fresh{0.99, 0.01};
  const double s = similarity(front, fresh, SimilarityMetric::cosine);
  EXPECT_NEAR(s, 0.99995, 1e-5);
  EXPECT_TRUE(keeps_queue(s, 0.97, SimilarityMetric::cosine));
  EXPECT_TRUE(keeps_queue(0.05, 0.1, SimilarityMetric::l2));
  EXPECT_FALSE(keeps_queue(0.2, 0.1, SimilarityMetric::l1));
}

TEST(SimilarityTest, DegenerateCosine) {
  const std::vector<double> zero{0.0, 0.0}, tiny{1e-9, 0.0}, unit{1.0, 0.0};
  EXPECT_EQ(similarity(zero, tiny, SimilarityMetric::cosine), 1.0);
  EXPECT_EQ(similarity(zero, unit, SimilarityMetric::cosine), 0.0);
  EXPECT_THROW(similarity(zero, std::vector<double>{1.0}, SimilarityMetric::cosine),
               ConfigError);
}

TEST(OpenLoopTest, OneChunkPerActionHorizon) {
  Executor ex(mode(ExecMode::open_loop));
  RandomSource src(1);
  for (int t = 0; t < 37; ++t) {
    const auto out = run_step(ex, src);
    EXPECT_EQ(out.replanned, t % 8 == 0);
  }
  EXPECT_EQ(src.calls(), 5u);  // ceil(37 / 8)
  EXPECT_EQ(ex.strong_samples(), 5u);
}

TEST(OpenLoopTest, ExecutesChunkPrefix) {
  Executor ex(mode(ExecMode::open_loop));
  CountingSource src;
  for (std::size_t t = 0; t < 24; ++t) {
    const auto a = run_step(ex, src).action;
    EXPECT_EQ(a[0], 100.0 * static_cast<double>(t / 8) + static_cast<double>(t % 8));
  }
}

TEST(ClosedLoopTest, EqualsOpenLoopWithUnitHorizon) {
  auto ol = mode(ExecMode::open_loop);
  ol.action_horizon = 1;
  const auto cl = run(mode(ExecMode::closed_loop), 3, 50);
  EXPECT_EQ(cl, run(ol, 3, 50));
  Executor ex(mode(ExecMode::closed_loop));
  RandomSource src(3);
  for (int t = 0; t < 50; ++t) {
    run_step(ex, src);
  }
  EXPECT_EQ(src.calls(), 50u);
}

TEST(EmaTest, ZeroLambdaIsClosedLoop) {
  auto cfg = mode(ExecMode::ema);
  cfg.lambda = 0.0;
  EXPECT_EQ(run(cfg, 4, 60), run(mode(ExecMode::closed_loop), 4, 60));
}

TEST(EmaTest, HalfLambdaAveragesAlignedChunks) {
  Executor ex(mode(ExecMode::ema));
  const Chunk zeros = constant_chunk(0.0, 0.0), twos = constant_chunk(2.0, 2.0);
  EXPECT_EQ(ex.step(std::span(&zeros, 1)).action, (Action{0.0, 0.0}));
  EXPECT_EQ(ex.step(std::span(&twos, 1)).action, (Action{1.0, 1.0}));
}

TEST(EmaTest, FullLambdaCarriesFirstChunk) {
  auto cfg = mode(ExecMode::ema);
  cfg.lambda = 1.0;
  Executor ex(cfg);
  CountingSource src;
  for (std::size_t t = 0; t < 20; ++t) {
    const auto a = run_step(ex, src).action;
    EXPECT_EQ(a[0], static_cast<double>(std::min(t, kH - 1)));
  }
}

TEST(AdaptiveTest, ThresholdAboveOneIsClosedLoop) {
  auto cfg = mode(ExecMode::adaptive);
  cfg.tau = 1.01;
  EXPECT_EQ(run(cfg, 5, 80), run(mode(ExecMode::closed_loop), 5, 80));
  for (auto metric : {SimilarityMetric::l1, SimilarityMetric::l2}) {
    cfg.metric = metric;
    cfg.tau = 0.0;
    EXPECT_EQ(run(cfg, 5, 80), run(mode(ExecMode::closed_loop), 5, 80));
  }
}

TEST(AdaptiveTest, ThresholdAtMinusOneIsStreamingOpenLoop) {
  auto cfg = mode(ExecMode::adaptive);
  cfg.tau = -1.0;
  EXPECT_EQ(run(cfg, 6, 80), run(mode(ExecMode::streaming), 6, 80));
  Executor ex(cfg);
  RandomSource src(6);
  for (int t = 0; t < 80; ++t) {
    const auto out = run_step(ex, src);
    EXPECT_EQ(out.replanned, t == 0);
    EXPECT_LE(ex.queue().size(), kH);
  }
  EXPECT_EQ(src.calls(), 80u);
  cfg.metric = SimilarityMetric::l2;
  cfg.tau = 1e9;
  EXPECT_EQ(run(cfg, 6, 80), run(mode(ExecMode::streaming), 6, 80));
}

TEST(AdaptiveTest, KeepBranchAppendsFinalAction) {
  Executor ex(mode(ExecMode::adaptive));
  const Chunk first = constant_chunk(1.0, 0.0);
  Chunk second = constant_chunk(0.99, 0.01);
  second.row(kH - 1)[0] = 0.5;
  auto out = ex.step(std::span(&first, 1));
  EXPECT_TRUE(out.replanned);
  EXPECT_EQ(ex.queue().size(), kH - 1);
  out = ex.step(std::span(&second, 1));
  EXPECT_FALSE(out.replanned);
  EXPECT_NEAR(out.similarity, 0.99995, 1e-5);
  EXPECT_EQ(out.action, (Action{1.0, 0.0}));
  EXPECT_EQ(ex.queue().back(), (Action{0.5, 0.01}));
  const Chunk turn = constant_chunk(0.0, 1.0);
  out = ex.step(std::span(&turn, 1));
  EXPECT_TRUE(out.replanned);
  EXPECT_EQ(out.action, (Action{0.0, 1.0}));
}

TEST(AdaptiveTest, RetainOnlyDrainsQueue) {
  auto cfg = mode(ExecMode::adaptive);
  cfg.tau = -1.0;
  cfg.retain_only = true;
  Executor ex(cfg);
  RandomSource src(2);
  for (std::size_t t = 0; t < 40; ++t) {
    EXPECT_EQ(run_step(ex, src).replanned, t % kH == 0) << t;
  }
}

TEST(BidTest, SingleSampleIsClosedLoop) {
  auto cfg = mode(ExecMode::bid);
  cfg.bid_samples = 1;
  EXPECT_EQ(run(cfg, 7, 60), run(mode(ExecMode::closed_loop), 7, 60));
}

TEST(BidTest, InvocationsAreTwoNPerStep) {
  auto cfg = mode(ExecMode::bid);
  cfg.bid_samples = 4;
  Executor ex(cfg);
  RandomSource strong(1), weak(2);
  for (int t = 0; t < 25; ++t) {
    run_step(ex, strong, &weak);
  }
  EXPECT_EQ(ex.strong_samples() + ex.weak_samples(), 2u * 4u * 25u);
  RandomSource s(1);
  EXPECT_THROW(run_step(ex, s, nullptr), ConfigError);
}

TEST(BidTest, ForwardContrastAvoidsWeakModes) {
  auto cfg = mode(ExecMode::bid);
  cfg.bid_samples = 2;
  Executor ex(cfg);
  const std::vector<Chunk> strong{constant_chunk(0.1, 0.1), constant_chunk(0.5, 0.5)};
  const std::vector<Chunk> weak{constant_chunk(0.1, 0.1), constant_chunk(0.1, 0.1)};
  EXPECT_EQ(ex.step(strong, weak).action, (Action{0.5, 0.5}));
}

TEST(BidTest, BackwardCoherencePrefersCommittedPlan) {
  auto cfg = mode(ExecMode::bid);
  cfg.bid_samples = 2;
  Executor ex(cfg);
  const std::vector<Chunk> first{constant_chunk(0.2, 0.2), constant_chunk(0.2, 0.2)};
  ex.step(first, first);
  // Forward terms tie; the candidate matching the committed plan wins.
  const std::vector<Chunk> next{constant_chunk(-0.6, -0.6), constant_chunk(0.2, 0.2)};
  EXPECT_EQ(ex.step(next, next).action, (Action{0.2, 0.2}));
  const std::vector<Chunk> same{constant_chunk(0.2, 0.2), constant_chunk(0.2, 0.2)};
  EXPECT_EQ(ex.step(same, next).action, (Action{0.2, 0.2}));
}

TEST(ExecutorTest, OneActionPerStepForEveryMode) {
  for (auto m : {ExecMode::open_loop, ExecMode::closed_loop, ExecMode::ema, ExecMode::bid,
                 ExecMode::adaptive, ExecMode::streaming}) {
    auto cfg = mode(m);
    cfg.bid_samples = 3;
    Executor ex(cfg);
    RandomSource strong(1), weak(2);
    for (int t = 0; t < 45; ++t) {
      const auto out = run_step(ex, strong, &weak);
      ASSERT_EQ(out.action.size(), 2u);
      ASSERT_LE(ex.queue().size(), kH);
    }
    EXPECT_EQ(ex.steps(), 45u) << to_string(m);
  }
}

TEST(ExecutorTest, RejectsWrongChunkCountsAndShapes) {
  Executor ex(mode(ExecMode::closed_loop));
  EXPECT_THROW(ex.step({}), UsageError);
  const Chunk bad = Tensor::matrix(8, 2);
  EXPECT_THROW(ex.step(std::span(&bad, 1)), ConfigError);
  auto cfg = mode(ExecMode::open_loop);
  cfg.action_horizon = 17;
  EXPECT_THROW(Executor{cfg}, ConfigError);
  cfg = mode(ExecMode::adaptive);
  cfg.metric = SimilarityMetric::l2;
  cfg.tau = -0.5;
  EXPECT_THROW(Executor{cfg}, ConfigError);
  EXPECT_EQ(parse_exec_mode("adaptive"), ExecMode::adaptive);
  EXPECT_THROW(parse_exec_mode("ac"), ConfigError);
  EXPECT_EQ(parse_metric("l2"), SimilarityMetric::l2);
}

TEST(TraceTest, CsvLayout) {
  std::vector<TraceRow> rows{{0, true, std::nan(""), {0.5, -0.25}},
                             {1, false, 0.75, {0.5, 0.0}}};
  std::ostringstream out;
  write_trace_csv(out, rows, 0xabcULL);
  EXPECT_EQ(out.str(),
            "# config_hash=0000000000000abc\n"
            "step,replanned,similarity,a0,a1\n"
            "0,1,,0.5,-0.25\n"
            "1,0,0.75,0.5,0\n");
}

}  // namespace
}  // namespace diffpush::executor
