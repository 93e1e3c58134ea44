#pragma once

#include <stdexcept>
#include <string>

namespace pacloud {

// Error categories. The CLI maps each one to its own exit code.

struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SimulationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OptimizationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  ConfigError(const std::string &key, const std::string &what)
      : std::runtime_error(key + ": " + what), key_(key) {}
  const std::string &key() const noexcept { return key_; }

private:
  std::string key_;
};

} // namespace pacloud
