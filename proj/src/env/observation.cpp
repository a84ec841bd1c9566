#include "diffpush/env/observation.hpp"

#include "diffpush/errors.hpp"

namespace diffpush::env {

ObservationWindow::ObservationWindow(std::size_t history_len, std::size_t max_lag)
    : history_len_(history_len), max_lag_(max_lag) {
  if (history_len == 0) {
    throw ConfigError("observation history must be >= 1");
  }
}

void ObservationWindow::push(const Observation& obs) {
  buffer_.push_back(obs);
  ++pushed_;
  while (buffer_.size() > history_len_ + max_lag_) {
    buffer_.pop_front();
  }
}

std::vector<double> ObservationWindow::shifted(std::size_t lag) const {
  if (buffer_.empty()) {
    throw UsageError("observation window is empty");
  }
  if (lag > max_lag_) {
    throw UsageError("lag exceeds the retained history");
  }
  if (lag + 1 > pushed_) {
    lag = 0;
  }
  // Index of the newest observation in the requested window.
  const std::size_t newest = buffer_.size() - 1 - lag;
  std::vector<double> out;
  out.reserve(history_len_ * kObsDim);
  for (std::size_t i = 0; i < history_len_; ++i) {
    const std::size_t back = history_len_ - 1 - i;
    const std::size_t idx = newest >= back ? newest - back : 0;
    out.insert(out.end(), buffer_[idx].begin(), buffer_[idx].end());
  }
  return out;
}

}  // namespace diffpush::env
