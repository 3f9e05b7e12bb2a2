#pragma once

#include <stdexcept>
#include <string>

namespace lyapnet {

// Invalid user input: bad dimensions, malformed config, non-finite seeds.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// Certification grid would exceed the configured point budget.
class GridBudgetError : public std::runtime_error {
 public:
  GridBudgetError(const std::string& what, double required_points)
      : std::runtime_error(what), required_points(required_points) {}
  double required_points;
};

// Operation only defined for a specific state dimension (e.g. 2d ROA scan).
class UnsupportedDimError : public std::runtime_error {
 public:
  explicit UnsupportedDimError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace lyapnet
