#include "diffpush/env/push_env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "diffpush/errors.hpp"

namespace diffpush::env {

namespace {

constexpr double kOuDecay = 0.9;
constexpr double kMinBlockGoal = 0.2;
constexpr double kMinAgentBlock = 0.12;

EnvState sample_layout(const EnvConfig& c, Rng& rng) {
  EnvState s;
  s.goal = c.goal;
  if (c.randomize_goal) {
    s.goal = {0.3 + 0.4 * rng.uniform(), 0.3 + 0.4 * rng.uniform()};
  }
  do {
    s.block = {0.2 + 0.6 * rng.uniform(), 0.2 + 0.6 * rng.uniform()};
  } while ((s.block - s.goal).norm() < kMinBlockGoal);
  do {
    s.agent = {0.1 + 0.8 * rng.uniform(), 0.1 + 0.8 * rng.uniform()};
  } while ((s.agent - s.block).norm() < kMinAgentBlock);
  return s;
}

}  // namespace

double Vec2::norm() const { return std::hypot(x, y); }

Vec2 clip_to_workspace(Vec2 p) {
  return {std::clamp(p.x, 0.0, 1.0), std::clamp(p.y, 0.0, 1.0)};
}

void EnvConfig::validate() const {
  if (max_steps == 0 || !(contact_radius > 0) || !(goal_radius > 0) || !(max_speed > 0) ||
      success_hold == 0) {
    throw ConfigError("environment sizes and radii must be positive");
  }
}

PerturbationKind parse_perturbation_kind(const std::string& name) {
  if (name == "block_drift") {
    return PerturbationKind::block_drift;
  }
  if (name == "actuator_noise") {
    return PerturbationKind::actuator_noise;
  }
  throw ConfigError("unknown perturbation kind '" + name + "'");
}

std::string to_string(PerturbationKind kind) {
  return kind == PerturbationKind::block_drift ? "block_drift" : "actuator_noise";
}

PushEnv::PushEnv(const EnvConfig& config, const PerturbationConfig& perturbation,
                 std::uint64_t seed)
    : config_(config), perturbation_(perturbation) {
  config_.validate();
  Rng layout(derive_seed(seed, "layout"));
  state_ = sample_layout(config_, layout);
  init_streams(seed);
}

PushEnv::PushEnv(const EnvConfig& config, const PerturbationConfig& perturbation,
                 std::uint64_t seed, const EnvState& initial)
    : config_(config), perturbation_(perturbation), state_(initial) {
  config_.validate();
  init_streams(seed);
}

void PushEnv::init_streams(std::uint64_t seed) {
  if (!(perturbation_.p >= 0.0)) {
    throw ConfigError("perturbation level P must be >= 0");
  }
  Rng dir(derive_seed(seed, "drift"));
  const double angle = 2.0 * std::numbers::pi * dir.uniform();
  drift_dir_ = {std::cos(angle), std::sin(angle)};
  noise_rng_ = Rng(derive_seed(seed, "actuator"));
  initial_distance_ = (state_.block - state_.goal).norm();
}

Observation PushEnv::observe() const {
  return {state_.agent.x, state_.agent.y, state_.block.x,
          state_.block.y, state_.goal.x,  state_.goal.y};
}

double PushEnv::coverage() const {
  if (initial_distance_ <= 0.0) {
    return 1.0;
  }
  const double d = (state_.block - state_.goal).norm();
  return std::max(0.0, 1.0 - d / initial_distance_);
}

StepResult PushEnv::step(Vec2 action) {
  if (done_) {
    throw UsageError("step called on a finished episode");
  }
  if (!std::isfinite(action.x) || !std::isfinite(action.y)) {
    done_ = true;
    success_ = false;
    return {true, false, true, coverage()};
  }
  const double p = perturbation_.p;
  Vec2 move{std::clamp(action.x, -1.0, 1.0) * config_.max_speed,
            std::clamp(action.y, -1.0, 1.0) * config_.max_speed};
  if (perturbation_.kind == PerturbationKind::actuator_noise && p > 0.0) {
    const double innovation = std::sqrt(1.0 - kOuDecay * kOuDecay);
    ou_ = ou_ * kOuDecay + Vec2{noise_rng_.normal(), noise_rng_.normal()} * innovation;
    move = move + ou_ * p;
  }
  state_.agent = clip_to_workspace(state_.agent + move);

  const Vec2 rel = state_.block - state_.agent;
  const double dist = rel.norm();
  if (dist < config_.contact_radius) {
    Vec2 normal = dist > 1e-12 ? rel * (1.0 / dist) : Vec2{1.0, 0.0};
    if (dist <= 1e-12 && move.norm() > 0.0) {
      normal = move * (1.0 / move.norm());
    }
    state_.block = clip_to_workspace(state_.agent + normal * config_.contact_radius);
  }
  if (perturbation_.kind == PerturbationKind::block_drift && p > 0.0) {
    state_.block = clip_to_workspace(state_.block + drift_dir_ * p);
  }
  ++state_.step;

  if ((state_.block - state_.goal).norm() < config_.goal_radius) {
    ++hold_;
  } else {
    hold_ = 0;
  }
  success_ = hold_ >= config_.success_hold;
  done_ = success_ || state_.step >= config_.max_steps;
  return {done_, success_, false, coverage()};
}

}  // namespace diffpush::env
