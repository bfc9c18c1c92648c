#pragma once

#include <stdexcept>
#include <string>

namespace fullnorm {

// Caller broke a documented precondition (shape mismatch, bad interval, ...).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A statistic was requested over zero samples.
class EmptyBatchError : public ContractError {
 public:
  using ContractError::ContractError;
};

// Statistics that cannot be inverted (a variance of zero where the
// caller needs 1/sqrt(var)).
class SingularStatsError : public ContractError {
 public:
  using ContractError::ContractError;
};

// On-disk data that does not match its declared layout.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fullnorm
