#pragma once

#include <stdexcept>
#include <string>

namespace cyctrack {

/// Raised when a caller breaks an operation's precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised when a numeric routine cannot produce a finite result.
class NumericFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data (file records, config values).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cyctrack
