#pragma once

#include <stdexcept>
#include <string>

namespace mrhet {

/// Invalid user input: bad configuration, malformed files, violated
/// preconditions. Maps to CLI exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A sampler or estimator produced a non-finite or singular quantity.
/// Maps to CLI exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mrhet
