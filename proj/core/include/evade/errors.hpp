#pragma once

#include <stdexcept>

namespace evade {

/// Caller broke an operation's precondition (wrong lengths, empty inputs, ...).
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

/// Input data failed validation (non-stochastic transition rows, bad layouts, ...).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Inconsistent or unusable experiment configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Training diverged or produced non-finite values.
struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace evade
