#pragma once

#include <stdexcept>
#include <string>

namespace lqglab {

/// Invalid parameters or inconsistent inputs (maps to CLI exit code 2).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A point or value falls outside the domain an operation is defined on.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A numerical result is unusable (zero mass, non-finite value, degenerate
/// conditioning event).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lqglab
