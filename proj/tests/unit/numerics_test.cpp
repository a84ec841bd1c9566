#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "diffpush/errors.hpp"
#include "diffpush/numerics/adam.hpp"
#include "diffpush/numerics/autodiff.hpp"
#include "diffpush/numerics/mlp.hpp"

namespace diffpush::numerics {
namespace {

constexpr double kFdStep = 1e-6;
constexpr double kFdTolerance = 1e-5;

Tensor random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& gen,
                     double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor t = Tensor::matrix(rows, cols);
  for (double& v : t.values()) {
    v = n(gen);
  }
  return t;
}

// |a - b| / max(|a|, |b|, 1e-6): relative error that tolerates exact zeros.
double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

// Central differences of `loss` around every element of every tensor in
// `params`, compared with the tape gradients.
void expect_matches_finite_differences(
    std::vector<ParamRef> params, const Gradients& grads,
    const std::function<double()>& loss) {
  ASSERT_EQ(params.size(), grads.entries().size());
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& t = *params[p].tensor;
    const Tensor& g = grads.at(params[p].name);
    ASSERT_TRUE(t.same_shape(g)) << params[p].name;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double saved = t[i];
      t[i] = saved + kFdStep;
      const double up = loss();
      t[i] = saved - kFdStep;
      const double down = loss();
      t[i] = saved;
      const double fd = (up - down) / (2.0 * kFdStep);
      EXPECT_LT(relative_error(g[i], fd), kFdTolerance)
          << params[p].name << "[" << i << "] autodiff=" << g[i] << " fd=" << fd;
    }
  }
}

TEST(TensorTest, ShapeMustMatchData) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), ConfigError);
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_EQ(Tensor::from({1, 2, 3}).rows(), 1u);
}

TEST(AutodiffTest, SumGradientIsOne) {
  Tape tape;
  Var w = tape.parameter("w", Tensor::from({0.3, -2.0, 7.0}));
  Gradients g = tape.backward(tape.sum(w));
  for (double v : g.at("w").values()) {
    EXPECT_EQ(v, 1.0);
  }
}

TEST(AutodiffTest, HalfSquaredNormGradientIsIdentity) {
  const Tensor w0 = Tensor::from({0.3, -2.0, 7.0, 0.0});
  Tape tape;
  Var w = tape.parameter("w", w0);
  Gradients g = tape.backward(tape.scale(tape.sum_squares(w), 0.5));
  EXPECT_EQ(g.at("w"), w0);
}

TEST(AutodiffTest, SecondBackwardIsUsageError) {
  Tape tape;
  Var w = tape.parameter("w", Tensor::from({1.0}));
  Var loss = tape.sum(w);
  tape.backward(loss);
  EXPECT_THROW(tape.backward(loss), UsageError);
  EXPECT_THROW(tape.sum(w), UsageError);
}

TEST(AutodiffTest, DetachedOrNonScalarLossIsUsageError) {
  Tape a;
  Tape b;
  Var w = a.parameter("w", Tensor::from({1.0, 2.0}));
  EXPECT_THROW(b.backward(a.sum(w)), UsageError);
  EXPECT_THROW(a.backward(Var{}), UsageError);
  EXPECT_THROW(a.backward(w), UsageError);
}

TEST(AutodiffTest, EveryOpMatchesFiniteDifferences) {
  std::mt19937_64 gen(7);
  Tensor x = random_matrix(3, 4, gen);
  Tensor w = random_matrix(4, 5, gen, 0.5);
  Tensor b = random_matrix(1, 5, gen, 0.1);
  b = Tensor({5}, std::vector<double>(b.values().begin(), b.values().end()));
  Tensor m = random_matrix(3, 5, gen);
  Tensor target = random_matrix(3, 5, gen);

  auto record = [&](Tape& tape) {
    Var vx = tape.parameter("x", x);
    Var vw = tape.parameter("w", w);
    Var vb = tape.parameter("b", b);
    Var vm = tape.parameter("m", m);
    Var h = tape.gated_linear(tape.affine(vx, vw, vb));
    Var mixed = tape.sub(tape.add(tape.mul(h, vm), tape.scale(h, 0.7)), vm);
    Var mse = tape.mean_row_sq_error(mixed, tape.constant(target));
    return tape.add(mse, tape.scale(tape.sum_squares(vm), 0.1));
  };
  Tape tape;
  Gradients grads = tape.backward(record(tape));
  auto loss = [&] {
    Tape t;
    return record(t).value()[0];
  };
  expect_matches_finite_differences(
      {{"x", &x}, {"w", &w}, {"b", &b}, {"m", &m}}, grads, loss);
}

TEST(AutodiffTest, TwoLayerMlpMseMatchesFiniteDifferences) {
  DenoiserArch arch;
  arch.horizon = 2;
  arch.action_dim = 2;
  arch.obs_dim = 2;
  arch.history_len = 1;
  arch.time_embed_dim = 4;
  arch.hidden = {6, 5};
  DenoiserParams params = DenoiserParams::initialize(arch, 11);
  std::mt19937_64 gen(3);
  Tensor input = random_matrix(4, arch.input_dim(), gen);
  Tensor target = random_matrix(4, arch.chunk_dim(), gen);

  auto record = [&](Tape& tape) {
    return tape.mean_row_sq_error(mlp_forward(tape, params, input),
                                  tape.constant(target));
  };
  Tape tape;
  Gradients grads = tape.backward(record(tape));
  auto loss = [&] {
    Tape t;
    return record(t).value()[0];
  };
  expect_matches_finite_differences(params.parameters(), grads, loss);
}

TEST(MlpTest, ParameterCountFollowsArchitecture) {
  DenoiserArch arch;
  EXPECT_EQ(arch.input_dim(), 32u + 13u + 32u);
  EXPECT_EQ(DenoiserParams::zeros(arch).parameter_count(), 159776u);
  EXPECT_EQ(DenoiserParams::initialize(arch, 1).parameter_count(), 159776u);
}

TEST(MlpTest, ZeroParametersGiveZeroOutput) {
  DenoiserArch arch;
  const DenoiserParams params = DenoiserParams::zeros(arch);
  std::vector<double> noisy(arch.chunk_dim(), 0.8);
  std::vector<double> cond(arch.cond_dim(), -1.3);
  const Tensor out = mlp_forward(params, noisy, cond, 17.0);
  ASSERT_EQ(out.size(), arch.chunk_dim());
  for (double v : out.values()) {
    EXPECT_EQ(v, 0.0);
  }
}

TEST(MlpTest, ForwardIsDeterministicAndBatchInvariant) {
  DenoiserArch arch;
  const DenoiserParams params = DenoiserParams::initialize(arch, 5);
  std::mt19937_64 gen(9);
  const Tensor noisy = random_matrix(7, arch.chunk_dim(), gen);
  const Tensor cond = random_matrix(7, arch.cond_dim(), gen);
  const std::vector<double> steps{1, 5, 5, 30, 99, 100, 2};
  const Tensor a = mlp_forward(params, noisy, cond, steps);
  const Tensor b = mlp_forward(params, noisy, cond, steps);
  EXPECT_EQ(a, b);
  for (std::size_t r = 0; r < 7; ++r) {
    const Tensor single = mlp_forward(params, noisy.row(r), cond.row(r), steps[r]);
    for (std::size_t j = 0; j < single.size(); ++j) {
      EXPECT_EQ(single[j], a.row(r)[j]) << "row " << r;
    }
  }
}

TEST(MlpTest, TapeForwardMatchesInference) {
  DenoiserArch arch;
  arch.hidden = {32, 32, 32};
  const DenoiserParams params = DenoiserParams::initialize(arch, 5);
  std::mt19937_64 gen(1);
  const Tensor noisy = random_matrix(3, arch.chunk_dim(), gen);
  const Tensor cond = random_matrix(3, arch.cond_dim(), gen);
  const std::vector<double> steps{3, 4, 5};
  Tape tape;
  Var out = mlp_forward(tape, params, assemble_input(arch, noisy, cond, steps));
  EXPECT_EQ(out.value().values().size(), 3 * arch.chunk_dim());
  const Tensor direct = mlp_forward(params, noisy, cond, steps);
  for (std::size_t i = 0; i < direct.size(); ++i) {
    EXPECT_EQ(direct[i], out.value()[i]);
  }
}

TEST(MlpTest, ShapeMismatchIsConfigError) {
  DenoiserArch arch;
  const DenoiserParams params = DenoiserParams::zeros(arch);
  std::vector<double> noisy(arch.chunk_dim() + 1);
  std::vector<double> cond(arch.cond_dim());
  EXPECT_THROW(mlp_forward(params, noisy, cond, 1.0), ConfigError);
  arch.time_embed_dim = 3;
  EXPECT_THROW(arch.validate(), ConfigError);
}

TEST(MlpTest, CheckpointRoundTripIsBitExact) {
  DenoiserArch arch;
  arch.hidden = {64, 48};
  const DenoiserParams params = DenoiserParams::initialize(arch, 21);
  const std::string bytes = encode_checkpoint(params, 0xABCDEF0123456789ull);
  ASSERT_EQ(bytes.substr(0, 4), "CHKF");
  const Checkpoint ck = decode_checkpoint(bytes);
  EXPECT_EQ(ck.config_hash, 0xABCDEF0123456789ull);
  EXPECT_EQ(ck.params.arch, arch);
  EXPECT_EQ(encode_checkpoint(ck.params, ck.config_hash), bytes);

  std::mt19937_64 gen(4);
  const Tensor noisy = random_matrix(3, arch.chunk_dim(), gen);
  const Tensor cond = random_matrix(3, arch.cond_dim(), gen);
  const std::vector<double> steps{1, 50, 100};
  EXPECT_EQ(mlp_forward(params, noisy, cond, steps),
            mlp_forward(ck.params, noisy, cond, steps));
}

TEST(MlpTest, CorruptCheckpointIsFormatError) {
  DenoiserArch arch;
  arch.hidden = {8};
  const std::string bytes = encode_checkpoint(DenoiserParams::zeros(arch), 1);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad_magic), FormatError);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), FormatError);
  EXPECT_THROW(decode_checkpoint(bytes + "extra"), FormatError);
}

TEST(TimeEmbeddingTest, DimTwoAtZero) {
  const Tensor e = time_embedding(0.0, 2);
  EXPECT_EQ(e[0], 0.0);
  EXPECT_EQ(e[1], 1.0);
}

TEST(TimeEmbeddingTest, DistinctAndBounded) {
  constexpr std::size_t kDim = 32;
  Tensor prev = time_embedding(1.0, kDim);
  for (int k = 2; k <= 1000; ++k) {
    const Tensor cur = time_embedding(k, kDim);
    EXPECT_NE(cur, prev) << k;
    double norm2 = 0.0;
    for (double v : cur.values()) {
      EXPECT_LE(std::abs(v), 1.0);
      norm2 += v * v;
    }
    EXPECT_LE(std::sqrt(norm2), std::sqrt(static_cast<double>(kDim)));
    prev = cur;
  }
  EXPECT_THROW(time_embedding(1.0, 3), ConfigError);
}

class AdamTest : public ::testing::Test {
 protected:
  Tensor w_ = Tensor::from({0.5, -1.0, 2.0});
  std::vector<ParamRef> params_{{"w", &w_}};

  Gradients grads(std::initializer_list<double> g) {
    Gradients out;
    out.entries().push_back({"w", Tensor::from(g)});
    return out;
  }
};

TEST_F(AdamTest, ZeroGradientLeavesParametersUnchanged) {
  OptimState state = OptimState::for_params(params_, {});
  const Tensor before = w_;
  adam_step(params_, grads({0, 0, 0}), state);
  EXPECT_EQ(w_, before);
  EXPECT_EQ(state.step, 1u);
}

TEST_F(AdamTest, MomentsDecayUnderZeroGradient) {
  OptimState state = OptimState::for_params(params_, {});
  adam_step(params_, grads({1.0, -2.0, 3.0}), state);
  const Tensor m1 = state.first_moment[0];
  const Tensor v1 = state.second_moment[0];
  adam_step(params_, grads({0, 0, 0}), state);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(state.first_moment[0][i], 0.9 * m1[i]);
    EXPECT_DOUBLE_EQ(state.second_moment[0][i], 0.999 * v1[i]);
  }
  EXPECT_EQ(state.step, 2u);
}

TEST_F(AdamTest, FirstStepMovesByLearningRateAgainstGradientSign) {
  AdamConfig cfg;
  cfg.lr = 0.01;
  OptimState state = OptimState::for_params(params_, cfg);
  const Tensor before = w_;
  adam_step(params_, grads({3.0, -0.2, 1e-3}), state);
  EXPECT_NEAR(w_[0] - before[0], -0.01, 1e-9);
  EXPECT_NEAR(w_[1] - before[1], +0.01, 1e-9);
  EXPECT_NEAR(w_[2] - before[2], -0.01, 1e-7);
}

TEST_F(AdamTest, ConstantGradientUpdateConvergesToLearningRate) {
  // With constant g the bias-corrected moments are exactly g and g^2, so
  // every update is lr * |g| / (|g| + eps).
  AdamConfig cfg;
  cfg.lr = 2e-3;
  OptimState state = OptimState::for_params(params_, cfg);
  const double g = 0.37;
  double last = 0.0;
  for (int i = 0; i < 2000; ++i) {
    const double before = w_[0];
    adam_step(params_, grads({g, g, g}), state);
    last = before - w_[0];
  }
  EXPECT_NEAR(last, cfg.lr * g / (g + cfg.epsilon), 1e-12);
  EXPECT_EQ(state.step, 2000u);
}

TEST_F(AdamTest, NonFiniteGradientNamesParameter) {
  OptimState state = OptimState::for_params(params_, {});
  try {
    adam_step(params_, grads({0.0, std::nan(""), 1.0}), state);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("'w'"), std::string::npos);
  }
  EXPECT_EQ(state.step, 0u);
}

}  // namespace
}  // namespace diffpush::numerics
