#include "diffpush/diffusion/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "diffpush/errors.hpp"

namespace diffpush::diffusion {

ScheduleKind parse_schedule_kind(const std::string& name) {
  if (name == "linear") {
    return ScheduleKind::linear;
  }
  if (name == "squared_cosine") {
    return ScheduleKind::squared_cosine;
  }
  throw ConfigError("unknown noise schedule '" + name + "'");
}

std::string to_string(ScheduleKind kind) {
  return kind == ScheduleKind::linear ? "linear" : "squared_cosine";
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
  if (betas.empty()) {
    throw ConfigError("noise schedule needs at least one step");
  }
  NoiseSchedule s;
  s.alpha_bar_.push_back(1.0);
  for (double b : betas) {
    if (!(b > 0.0 && b < 1.0)) {
      throw ConfigError("beta must lie in (0, 1), got " + std::to_string(b));
    }
    s.alpha_bar_.push_back(s.alpha_bar_.back() * (1.0 - b));
  }
  for (std::size_t k = 1; k <= betas.size(); ++k) {
    s.posterior_var_.push_back((1.0 - s.alpha_bar_[k - 1]) /
                               (1.0 - s.alpha_bar_[k]) * betas[k - 1]);
  }
  s.beta_ = std::move(betas);
  return s;
}

NoiseSchedule build_schedule(ScheduleKind kind, std::size_t steps,
                             LinearBetaRange range) {
  if (steps < 2) {
    throw ConfigError("noise schedule needs K >= 2, got " + std::to_string(steps));
  }
  std::vector<double> betas(steps);
  if (kind == ScheduleKind::linear) {
    for (std::size_t i = 0; i < steps; ++i) {
      const double frac = static_cast<double>(i) / static_cast<double>(steps - 1);
      betas[i] = range.start + frac * (range.end - range.start);
    }
  } else {
    constexpr double kOffset = 0.008;
    constexpr double kMaxBeta = 0.999;
    auto f = [&](double t) {
      const double c = std::cos((t / static_cast<double>(steps) + kOffset) /
                                (1.0 + kOffset) * std::numbers::pi / 2.0);
      return c * c;
    };
    for (std::size_t i = 0; i < steps; ++i) {
      const double ratio = f(static_cast<double>(i + 1)) / f(static_cast<double>(i));
      betas[i] = std::min(1.0 - ratio, kMaxBeta);
    }
  }
  return NoiseSchedule::from_betas(std::move(betas));
}

}  // namespace diffpush::diffusion
