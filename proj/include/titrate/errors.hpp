#pragma once

#include <stdexcept>
#include <string>

namespace titrate {

// Bad physical/model parameters (out-of-range demographics, negative rates).
class ParameterError : public std::invalid_argument {
 public:
  explicit ParameterError(const std::string& what) : std::invalid_argument(what) {}
};

// Invalid configuration or malformed input file.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// Non-finite values in the network, gradients or metrics.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Statistically undefined quantity (e.g. a t-test on zero-variance differences).
class DegenerateError : public std::domain_error {
 public:
  explicit DegenerateError(const std::string& what) : std::domain_error(what) {}
};

}  // namespace titrate
