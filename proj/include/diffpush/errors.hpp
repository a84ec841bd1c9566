#pragma once

#include <stdexcept>
#include <string>

namespace diffpush {

// Invalid configuration or mismatched shapes/architectures.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// API misuse, e.g. calling backward twice on the same tape.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Non-finite losses or gradients during optimization.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Corrupt or incompatible files.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Demonstration generation could not collect enough successful episodes.
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace diffpush
