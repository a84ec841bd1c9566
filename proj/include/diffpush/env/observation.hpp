#pragma once

#include <cstddef>
#include <deque>
#include <vector>

#include "diffpush/env/push_env.hpp"

namespace diffpush::env {

// Recent observations, newest last. Windows are flattened oldest first and
// padded by repeating the earliest observation until enough have arrived.
class ObservationWindow {
 public:
  ObservationWindow(std::size_t history_len, std::size_t max_lag);

  void push(const Observation& obs);
  void clear() { buffer_.clear(); pushed_ = 0; }
  std::size_t pushed() const { return pushed_; }
  std::size_t history_len() const { return history_len_; }

  std::vector<double> current() const { return shifted(0); }
  // Window as it was `lag` pushes ago. Before that much history exists the
  // current window is returned.
  std::vector<double> shifted(std::size_t lag) const;

 private:
  std::size_t history_len_;
  std::size_t max_lag_;
  std::deque<Observation> buffer_;
  std::size_t pushed_ = 0;
};

}  // namespace diffpush::env
