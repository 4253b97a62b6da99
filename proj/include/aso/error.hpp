#pragma once

#include <stdexcept>
#include <string>

namespace aso {

// Base for every library error. The CLI maps these to exit status 2,
// except UndefinedMetricError which is a warning (status 1).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent arguments (length mismatch, off-grid value, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

// Mathematically undefined operation, e.g. KL with q(s) = 0 < p(s).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Inputs that are individually valid but cannot be normalized.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// A metric with no defined value on the given data (zero variance etc.).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace aso
