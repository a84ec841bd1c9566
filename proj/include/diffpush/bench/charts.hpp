#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diffpush/bench/evaluate.hpp"

namespace diffpush::bench {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> mean;
  std::vector<double> std;
};

// Grouped bars of mean coverage with std whiskers, one group per P.
std::string bar_chart_svg(const ResultTable& table, const std::string& title,
                          std::uint64_t config_hash);

// Lines with std bands over a shared x axis.
std::string line_chart_svg(const std::vector<Series>& series, const std::string& title,
                           const std::string& x_label, const std::string& y_label,
                           std::uint64_t config_hash);

}  // namespace diffpush::bench
