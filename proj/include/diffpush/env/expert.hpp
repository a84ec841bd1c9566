#pragma once

#include "diffpush/env/push_env.hpp"

namespace diffpush::env {

struct ExpertConfig {
  double push_depth = 0.03;     // how far inside the contact circle to aim
  double approach_gap = 0.03;   // clearance of the pre-push point
  double detour_gap = 0.05;     // clearance when circling the block
  double align_along = 0.3;     // aligned when behind by > align_along * r ...
  double align_lateral = 1.0;   // ... and off-axis by < align_lateral * r
  double settle = 0.005;        // block this close to the goal: stop
};

// Two-phase scripted controller: get behind the block on the goal line,
// circling on side `side` (+1 or -1) when the block is in the way, then push
// toward the goal. Output lies in [-1, 1]^2.
Vec2 expert_action(const EnvState& state, const EnvConfig& env, int side,
                   const ExpertConfig& config = {});

}  // namespace diffpush::env
