#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace lc {

// Tensor shapes incompatible with an operation's contract.
class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid model, training, or data configuration.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Unreadable or malformed file (image, checkpoint, CSV, config).
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Training produced a non-finite loss.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, std::int64_t iteration)
      : std::runtime_error(what), iteration(iteration) {}
  std::int64_t iteration;
};

}  // namespace lc
