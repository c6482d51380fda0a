#pragma once

#include <stdexcept>
#include <string>

namespace pdkf {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dimension mismatch or other broken precondition of a call.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Invalid experiment configuration (bad keys, infeasible topology, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Singular innovation covariance, non-convergent Riccati iteration,
/// unstable error recursion.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

}  // namespace pdkf
