#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "diffpush/bench/evaluate.hpp"

namespace diffpush::bench {

enum class SweepAxis { guidance_w, tau, lambda, p };

SweepAxis parse_sweep_axis(const std::string& name);
std::string to_string(SweepAxis axis);

struct SweepPoint {
  double value = 0.0;
  double p = 0.0;
  ResultRow row;
};

// Evaluates `base` with one field replaced by each value. Non-P axes run at
// every P of the config; the P axis replaces the config's P list.
std::vector<SweepPoint> run_sweep(const ExperimentConfig& config, const ModelBundle& models,
                                  const MethodSpec& base, SweepAxis axis,
                                  const std::vector<double>& values, std::size_t workers,
                                  std::vector<EpisodeResult>* episodes = nullptr);

// "# config_hash" then axis value,p,mean,std,success_mean,success_std rows
// (mean and std of coverage).
void write_sweep_csv(std::ostream& out, SweepAxis axis, const std::vector<SweepPoint>& points,
                     std::uint64_t config_hash);

// Value with the highest mean coverage at `p`; ties keep the smallest value.
double best_value(const std::vector<SweepPoint>& points, double p);

}  // namespace diffpush::bench
