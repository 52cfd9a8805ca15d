#pragma once

#include <stdexcept>
#include <string>

namespace bubblekit {

/// Invalid user input: bad parameters, malformed configuration, violated preconditions.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A point was queried outside the domain of a map.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A numerical procedure failed (non-convergence, non-monotone discretization, ...).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bubblekit
