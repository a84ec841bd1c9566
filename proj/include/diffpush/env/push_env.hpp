#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>

#include "diffpush/random.hpp"

namespace diffpush::env {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double norm() const;
  friend bool operator==(Vec2, Vec2) = default;
};

inline constexpr std::size_t kObsDim = 6;
inline constexpr std::size_t kActionDim = 2;
using Observation = std::array<double, kObsDim>;

struct EnvConfig {
  std::size_t max_steps = 300;
  double contact_radius = 0.05;
  double goal_radius = 0.05;
  double max_speed = 0.02;
  std::size_t success_hold = 5;
  Vec2 goal{0.5, 0.5};
  bool randomize_goal = false;

  void validate() const;
};

enum class PerturbationKind { block_drift, actuator_noise };

PerturbationKind parse_perturbation_kind(const std::string& name);
std::string to_string(PerturbationKind kind);

struct PerturbationConfig {
  double p = 0.0;
  PerturbationKind kind = PerturbationKind::block_drift;
};

struct EnvState {
  Vec2 agent;
  Vec2 block;
  Vec2 goal;
  std::size_t step = 0;
};

struct StepResult {
  bool done = false;
  bool success = false;
  bool aborted = false;  // non-finite action
  double metric = 0.0;   // coverage score in [0, 1]
};

// Circle agent pushing a circle block toward a goal in the unit square.
// Every random quantity of an episode (initial layout, drift direction,
// actuator noise) comes from the episode seed.
class PushEnv {
 public:
  PushEnv(const EnvConfig& config, const PerturbationConfig& perturbation,
          std::uint64_t seed);

  // Starts from an explicit layout; drift direction and noise still follow
  // the seed.
  PushEnv(const EnvConfig& config, const PerturbationConfig& perturbation,
          std::uint64_t seed, const EnvState& initial);

  // `action` is a velocity command; it is clipped to [-1, 1]^2 and scaled by
  // max_speed.
  StepResult step(Vec2 action);

  const EnvState& state() const { return state_; }
  Observation observe() const;
  bool done() const { return done_; }
  bool success() const { return success_; }
  double coverage() const;
  Vec2 drift_direction() const { return drift_dir_; }
  double initial_distance() const { return initial_distance_; }
  const EnvConfig& config() const { return config_; }
  const PerturbationConfig& perturbation() const { return perturbation_; }

 private:
  void init_streams(std::uint64_t seed);

  EnvConfig config_;
  PerturbationConfig perturbation_;
  EnvState state_;
  Rng noise_rng_;
  Vec2 drift_dir_;
  Vec2 ou_;
  double initial_distance_ = 0.0;
  std::size_t hold_ = 0;
  bool done_ = false;
  bool success_ = false;
};

Vec2 clip_to_workspace(Vec2 p);

}  // namespace diffpush::env
