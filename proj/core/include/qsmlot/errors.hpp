#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace qsmlot {

// Error taxonomy. The CLI maps these onto exit codes:
//   StructuralError / DomainError / ConfigError -> 1 (validation)
//   IoError / any other runtime failure         -> 2 (runtime)
//   ConvergenceError                            -> 3 (convergence)
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape disagreements: mismatched dims, out-of-bounds placement, grids too
// small for an operator.
class StructuralError : public Error {
 public:
  using Error::Error;
};

// Parameter outside its admissible range (non-positive TE, empty ROI, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Requested a file feature the reader deliberately does not implement.
class UnsupportedError : public IoError {
 public:
  using IoError::IoError;
};

// Iterative solver failed to reach tolerance; carries the last residual.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& msg, double residual)
      : Error(msg), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_ = 0.0;
};

// Configuration document rejected; lists every offending key.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& msg, std::vector<std::string> keys)
      : Error(msg), keys_(std::move(keys)) {}
  const std::vector<std::string>& offending_keys() const { return keys_; }

 private:
  std::vector<std::string> keys_;
};

}  // namespace qsmlot
