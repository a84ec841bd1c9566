#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace diffpush::diffusion {

enum class ScheduleKind { linear, squared_cosine };

ScheduleKind parse_schedule_kind(const std::string& name);
std::string to_string(ScheduleKind kind);

// beta/alpha tables for K forward steps, indexed 1..K. alpha_bar(0) == 1.
class NoiseSchedule {
 public:
  // Throws ConfigError unless every beta lies in (0, 1) and there is at least
  // one step.
  static NoiseSchedule from_betas(std::vector<double> betas);

  std::size_t steps() const { return beta_.size(); }
  double beta(std::size_t k) const { return beta_.at(k - 1); }
  double alpha(std::size_t k) const { return 1.0 - beta(k); }
  double alpha_bar(std::size_t k) const { return alpha_bar_.at(k); }
  // beta~_k = (1 - alpha_bar_{k-1}) / (1 - alpha_bar_k) * beta_k
  double posterior_variance(std::size_t k) const { return posterior_var_.at(k - 1); }

 private:
  std::vector<double> beta_;
  std::vector<double> alpha_bar_;  // [0..K]
  std::vector<double> posterior_var_;
};

struct LinearBetaRange {
  double start = 1e-4;
  double end = 0.02;
};

// linear: betas evenly spaced from range.start to range.end.
// squared_cosine: alpha_bar(t) = f(t)/f(0), f(t) = cos^2(((t/K)+s)/(1+s) pi/2),
// s = 0.008, betas capped at 0.999.
// Throws ConfigError for K < 2.
NoiseSchedule build_schedule(ScheduleKind kind, std::size_t steps,
                             LinearBetaRange range = {});

}  // namespace diffpush::diffusion
