#pragma once

#include <stdexcept>
#include <string>

namespace auxeff {

// Bad inputs: malformed files, invalid values, shape mismatches, domain violations.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failures: non-convergence, separation, singular systems, inestimable weights.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace auxeff
