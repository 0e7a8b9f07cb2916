#pragma once

#include <stdexcept>
#include <string>

namespace wemp {

/// Invalid input: bad parameters, malformed files, violated preconditions.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical routine could not deliver its contract (breakdown, residual
/// too large, rank collapse).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace wemp
