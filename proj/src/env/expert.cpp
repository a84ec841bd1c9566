#include "diffpush/env/expert.hpp"

#include <algorithm>
#include <cmath>

namespace diffpush::env {

namespace {

// Velocity command that moves toward `target` by at most `limit`.
Vec2 toward(Vec2 from, Vec2 target, double limit, double max_speed) {
  const Vec2 d = target - from;
  const double n = d.norm();
  if (n < 1e-12) {
    return {};
  }
  const double len = std::min(n, limit);
  return d * (len / n / max_speed);
}

}  // namespace

Vec2 expert_action(const EnvState& s, const EnvConfig& env, int side,
                   const ExpertConfig& c) {
  const double r = env.contact_radius;
  const Vec2 to_goal = s.goal - s.block;
  const double d = to_goal.norm();
  if (d < c.settle) {
    return {};
  }
  const Vec2 dir = to_goal * (1.0 / d);
  const Vec2 perp{-dir.y, dir.x};
  const Vec2 rel = s.agent - s.block;
  const double along = rel.dot(dir);
  const double lateral = rel.dot(perp);

  if (along < -c.align_along * r && std::abs(lateral) < c.align_lateral * r) {
    const Vec2 aim = s.block - dir * (r - c.push_depth);
    return toward(s.agent, aim, std::min(env.max_speed, d), env.max_speed);
  }

  const Vec2 behind = s.block - dir * (r + c.approach_gap);
  const double clearance = r + c.detour_gap;
  if (along > -r && std::abs(lateral) < clearance) {
    // Block between agent and the pre-push point: go round it.
    const int way = std::abs(lateral) > 0.2 * r ? (lateral > 0 ? 1 : -1) : side;
    const Vec2 waypoint = s.block + perp * (way * clearance) - dir * (r + 0.02);
    return toward(s.agent, waypoint, env.max_speed, env.max_speed);
  }
  return toward(s.agent, behind, env.max_speed, env.max_speed);
}

}  // namespace diffpush::env
