#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "diffpush/diffusion/sampler.hpp"
#include "diffpush/diffusion/schedule.hpp"
#include "diffpush/errors.hpp"
#include "diffpush/guidance/guidance.hpp"

namespace diffpush::guidance {
namespace {

using diffusion::CountingPredictor;
using diffusion::MlpDenoiser;
using numerics::DenoiserArch;
using numerics::DenoiserParams;

using PredictFn =
    std::function<Tensor(const Tensor&, const Tensor&, std::span<const double>)>;

class FnPredictor final : public NoisePredictor {
 public:
  FnPredictor(std::size_t chunk, std::size_t cond, bool null_token, PredictFn fn)
      : chunk_(chunk), cond_(cond), null_(null_token), fn_(std::move(fn)) {}
  std::size_t chunk_dim() const override { return chunk_; }
  std::size_t cond_dim() const override { return cond_; }
  bool supports_null_condition() const override { return null_; }
  Tensor predict(const Tensor& x, const Tensor& c,
                 std::span<const double> steps) const override {
    return fn_(x, c, steps);
  }

 private:
  std::size_t chunk_, cond_;
  bool null_;
  PredictFn fn_;
};

DenoiserArch small_arch() {
  DenoiserArch a;
  a.horizon = 4;
  a.obs_dim = 3;
  a.time_embed_dim = 8;
  a.hidden = {16, 16};
  return a;
}

Tensor random_rows(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t = Tensor::matrix(rows, cols);
  for (double& v : t.values()) {
    v = rng.normal();
  }
  return t;
}

Tensor with_flag(Tensor cond, double flag) {
  for (std::size_t r = 0; r < cond.rows(); ++r) {
    cond.row(r)[cond.cols() - 1] = flag;
  }
  return cond;
}

void expect_near(const Tensor& a, const Tensor& b, double tol) {
  ASSERT_TRUE(a.same_shape(b));
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(a[i], b[i], tol) << i;
  }
}

struct Fixture {
  DenoiserArch arch = small_arch();
  DenoiserParams strong = DenoiserParams::initialize(arch, 1);
  DenoiserParams weak = DenoiserParams::initialize(arch, 2);
  MlpDenoiser model{strong};
  MlpDenoiser weak_model{weak};
  Tensor x, cond, prev;

  Fixture() {
    Rng rng(3);
    x = random_rows(3, arch.chunk_dim(), rng);
    cond = with_flag(random_rows(3, arch.cond_dim(), rng), 0.0);
    prev = with_flag(random_rows(3, arch.cond_dim(), rng), 0.0);
  }
  Tensor plain(std::size_t step) const {
    return model.predict(x, cond, std::vector<double>(x.rows(), double(step)));
  }
};

TEST(CombineTest, Identities) {
  const Tensor a = Tensor::from({1.0, 0.0});
  const Tensor b = Tensor::from({0.0, 1.0});
  EXPECT_EQ(combine(a, b, 1.0), Tensor::from({2.0, -1.0}));
  Rng rng(1);
  const Tensor p = random_rows(4, 5, rng);
  const Tensor q = random_rows(4, 5, rng);
  EXPECT_EQ(combine(p, q, 0.0), p);
  for (double w : {0.0, 0.5, 1.0, 2.23, 7.0}) {
    EXPECT_EQ(combine(p, p, w), p) << w;
  }
  // affine in w
  const Tensor c1 = combine(p, q, 1.0), c3 = combine(p, q, 3.0), c2 = combine(p, q, 2.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_NEAR(c2[i], 0.5 * (c1[i] + c3[i]), 1e-12);
  }
  EXPECT_THROW(combine(a, Tensor::from({1.0}), 1.0), ConfigError);
}

TEST(SelfGuidanceTest, EqualNegativeCancels) {
  Fixture f;
  for (double w : {0.0, 1.0, 3.0}) {
    EXPECT_EQ(self_guided_eps(f.model, f.x, f.cond, f.cond, 40, w), f.plain(40)) << w;
  }
}

TEST(SelfGuidanceTest, ZeroWeightIsBitExact) {
  Fixture f;
  EXPECT_EQ(self_guided_eps(f.model, f.x, f.cond, f.prev, 40, 0.0), f.plain(40));
}

TEST(SelfGuidanceTest, SingleBatchedInvocation) {
  Fixture f;
  CountingPredictor counter(f.model);
  const Tensor x1 = Tensor({1, f.arch.chunk_dim()},
                           std::vector<double>(f.x.row(0).begin(), f.x.row(0).end()));
  const Tensor c1 = Tensor({1, f.arch.cond_dim()},
                           std::vector<double>(f.cond.row(0).begin(), f.cond.row(0).end()));
  const Tensor p1 = Tensor({1, f.arch.cond_dim()},
                           std::vector<double>(f.prev.row(0).begin(), f.prev.row(0).end()));
  self_guided_eps(counter, x1, c1, p1, 10, 1.5);
  EXPECT_EQ(counter.calls(), 1u);
  EXPECT_EQ(counter.rows(), 2u);
}

// eps(x, s) = sin(s): SG at w = 1 extrapolates to sin(s + dt) with a
// second-order remainder, sin(s) * dt^2 to leading order.
TEST(SelfGuidanceTest, TaylorRemainderIsSecondOrder) {
  FnPredictor sine(1, 1, false, [](const Tensor& x, const Tensor& c, auto) {
    Tensor out(x.shape());
    for (std::size_t r = 0; r < x.rows(); ++r) {
      out.row(r)[0] = std::sin(c.row(r)[0]);
    }
    return out;
  });
  const double s = 0.7;
  auto error = [&](double dt) {
    const Tensor x = Tensor::matrix(1, 1);
    const Tensor sg = self_guided_eps(sine, x, Tensor::matrix(1, 1, s),
                                      Tensor::matrix(1, 1, s - dt), 5, 1.0);
    return std::abs(sg[0] - std::sin(s + dt));
  };
  for (double dt : {0.2, 0.1, 0.05}) {
    const double ratio = error(dt) / error(dt / 2);
    EXPECT_GE(ratio, 3.5) << dt;
    EXPECT_LE(ratio, 4.5) << dt;
  }
}

double normal_cdf(double x, double mean, double sd) {
  return 0.5 * std::erfc(-(x - mean) / (sd * std::sqrt(2.0)));
}

// Data a | s ~ N(s, sigma^2). The exact noise predictor at step k is
// sqrt(1-ab) (x - sqrt(ab) s) / (ab sigma^2 + 1 - ab). Guided sampling should
// draw from p(a|s_t)^(1+w) / p(a|s_prev)^w = N((1+w) s_t - w s_prev, sigma^2).
TEST(SelfGuidanceTest, PosteriorMatchesReweightedGaussian) {
  const auto sched = diffusion::build_schedule(diffusion::ScheduleKind::squared_cosine, 100);
  const double sigma = 0.5, s_t = 0.4, s_prev = 0.1, w = 1.5;
  FnPredictor exact(1, 1, false, [&](const Tensor& x, const Tensor& c, auto steps) {
    Tensor out(x.shape());
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const double ab = sched.alpha_bar(static_cast<std::size_t>(steps[r]));
      out.row(r)[0] = std::sqrt(1.0 - ab) * (x.row(r)[0] - std::sqrt(ab) * c.row(r)[0]) /
                      (ab * sigma * sigma + 1.0 - ab);
    }
    return out;
  });
  constexpr std::size_t kBatch = 1000, kBatches = 100;
  std::vector<double> samples;
  samples.reserve(kBatch * kBatches);
  for (std::size_t b = 0; b < kBatches; ++b) {
    std::vector<Rng> gens;
    std::vector<Rng*> ptrs;
    gens.reserve(kBatch);
    for (std::size_t i = 0; i < kBatch; ++i) {
      gens.emplace_back(derive_seed(99, b * kBatch + i));
      ptrs.push_back(&gens.back());
    }
    GuidedEpsilon::Inputs in;
    in.model = &exact;
    in.cond = Tensor::matrix(kBatch, 1, s_t);
    in.prev_cond = Tensor::matrix(kBatch, 1, s_prev);
    GuidedEpsilon eps({GuidanceKind::self_guidance, w}, std::move(in));
    const Tensor out = diffusion::ddpm_sample(eps, sched, ptrs, 1);
    samples.insert(samples.end(), out.values().begin(), out.values().end());
  }
  std::sort(samples.begin(), samples.end());
  const double mean = (1.0 + w) * s_t - w * s_prev;
  double ks = 0.0;
  const double n = static_cast<double>(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = normal_cdf(samples[i], mean, sigma);
    ks = std::max({ks, std::abs(f - i / n), std::abs((i + 1) / n - f)});
  }
  EXPECT_LT(ks, 0.05);
}

TEST(AutoGuidanceTest, IdentitiesAndMismatch) {
  Fixture f;
  EXPECT_EQ(autoguided_eps(f.model, f.weak_model, f.x, f.cond, 7, 0.0), f.plain(7));
  for (double w : {0.5, 2.0}) {
    expect_near(autoguided_eps(f.model, f.model, f.x, f.cond, 7, w), f.plain(7), 1e-12);
  }
  auto other_arch = f.arch;
  other_arch.horizon = 5;
  const auto other = DenoiserParams::initialize(other_arch, 3);
  EXPECT_THROW(autoguided_eps(f.model, MlpDenoiser(other), f.x, f.cond, 7, 1.0),
               ConfigError);
}

TEST(CfgTest, IdentitiesAndMissingNullToken) {
  Fixture f;
  EXPECT_EQ(cfg_eps(f.model, f.x, f.cond, 12, 0.0), f.plain(12));
  const Tensor null_cond = with_flag(Tensor::matrix(3, f.arch.cond_dim()), 1.0);
  const Tensor uncond =
      f.model.predict(f.x, null_cond, std::vector<double>(3, 12.0));
  for (double w : {1.0, 2.0}) {
    expect_near(cfg_eps(f.model, f.x, null_cond, 12, w), uncond, 1e-12);
  }
  auto arch = f.arch;
  arch.null_token = false;
  const auto params = DenoiserParams::initialize(arch, 5);
  Rng rng(1);
  const Tensor c = random_rows(3, arch.cond_dim(), rng);
  EXPECT_THROW(cfg_eps(MlpDenoiser(params), f.x, c, 12, 1.0), ConfigError);
}

TEST(NoisedObsTest, ZeroScaleAndZeroWeight) {
  Fixture f;
  Rng a(1), b(2), c(3);
  Rng* rngs[] = {&a, &b, &c};
  for (double w : {0.5, 3.0}) {
    expect_near(noised_obs_eps(f.model, f.x, f.cond, 30, w, 0.0, rngs), f.plain(30), 1e-12);
  }
  EXPECT_EQ(noised_obs_eps(f.model, f.x, f.cond, 30, 0.0, 0.1, rngs), f.plain(30));
  const Tensor g1 = noised_obs_eps(f.model, f.x, f.cond, 30, 1.0, 0.1, rngs);
  const Tensor g2 = noised_obs_eps(f.model, f.x, f.cond, 30, 1.0, 0.1, rngs);
  EXPECT_NE(g1, g2);  // fresh perturbation per call
}

TEST(NoisedObsTest, LeavesNullFlagUntouched) {
  DenoiserArch arch = small_arch();
  std::vector<double> seen_flags;
  FnPredictor probe(arch.chunk_dim(), arch.cond_dim(), true,
                    [&](const Tensor& x, const Tensor& c, auto) {
                      for (std::size_t r = 0; r < c.rows(); ++r) {
                        seen_flags.push_back(c.row(r)[c.cols() - 1]);
                      }
                      return Tensor(x.shape());
                    });
  Rng a(1);
  Rng* rngs[] = {&a};
  noised_obs_eps(probe, Tensor::matrix(1, arch.chunk_dim()),
                 Tensor::matrix(1, arch.cond_dim()), 3, 1.0, 5.0, rngs);
  EXPECT_EQ(seen_flags, (std::vector<double>{0.0, 0.0}));
}

TEST(TimestepGuidanceTest, PerturbedStepAndIdentities) {
  EXPECT_EQ(perturbed_timestep(10, 2.0, 1.0, 100), 30u);
  EXPECT_EQ(perturbed_timestep(60, 2.0, 1.0, 100), 100u);
  EXPECT_EQ(perturbed_timestep(7, 0.0, 1.0, 100), 7u);
  EXPECT_EQ(perturbed_timestep(4, 0.5, 2.0, 100), 12u);
  Fixture f;
  EXPECT_EQ(timestep_guided_eps(f.model, f.x, f.cond, 20, 0.0, 2.0, 1.0, 100), f.plain(20));
  expect_near(timestep_guided_eps(f.model, f.x, f.cond, 20, 2.0, 0.0, 1.0, 100),
              f.plain(20), 1e-12);
}

TEST(GuidedEpsilonTest, ZeroWeightSamplingMatchesUnguided) {
  Fixture f;
  const auto sched = diffusion::build_schedule(diffusion::ScheduleKind::squared_cosine, 100);
  auto sample = [&](GuidanceSpec spec, bool ddim) {
    Rng a(5), b(6), c(7);
    Rng* rngs[] = {&a, &b, &c};
    Rng na(8), nb(9), nc(10);
    Rng* noise[] = {&na, &nb, &nc};
    GuidedEpsilon::Inputs in;
    in.model = &f.model;
    in.weak = &f.weak_model;
    in.cond = f.cond;
    in.prev_cond = f.prev;
    in.noise_rngs = noise;
    in.max_step = sched.steps();
    GuidedEpsilon eps(spec, std::move(in));
    return ddim ? diffusion::ddim_sample(eps, sched, 30, rngs, f.arch.chunk_dim())
                : diffusion::ddpm_sample(eps, sched, rngs, f.arch.chunk_dim());
  };
  for (bool ddim : {true, false}) {
    const Tensor base = sample({}, ddim);
    for (auto kind : {GuidanceKind::cfg, GuidanceKind::autoguidance,
                      GuidanceKind::self_guidance, GuidanceKind::noised_obs,
                      GuidanceKind::timestep}) {
      GuidanceSpec spec;
      spec.kind = kind;
      EXPECT_EQ(sample(spec, ddim), base) << to_string(kind) << " ddim=" << ddim;
    }
  }
}

TEST(GuidedEpsilonTest, RejectsIncompleteInputs) {
  Fixture f;
  GuidedEpsilon::Inputs in;
  in.model = &f.model;
  in.cond = f.cond;
  EXPECT_THROW(GuidedEpsilon({GuidanceKind::autoguidance, 1.0}, in), ConfigError);
  EXPECT_THROW(GuidedEpsilon({GuidanceKind::self_guidance, 1.0}, in), ConfigError);
  EXPECT_THROW(GuidedEpsilon({GuidanceKind::noised_obs, 1.0}, in), ConfigError);
  EXPECT_THROW(GuidedEpsilon({GuidanceKind::timestep, 1.0}, in), ConfigError);
  EXPECT_THROW(GuidedEpsilon({GuidanceKind::none, -1.0}, in), ConfigError);
  EXPECT_EQ(parse_guidance_kind("self_guidance"), GuidanceKind::self_guidance);
  EXPECT_THROW(parse_guidance_kind("sg"), ConfigError);
}

}  // namespace
}  // namespace diffpush::guidance
