#pragma once

#include <stdexcept>
#include <string>

namespace cvnn {

/// Operand dimensions that do not compose.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A precondition on a numeric argument was violated.
struct DomainError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Explicit conv lowering would exceed the configured memory budget.
struct BudgetExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MalformedCheckpoint : CheckpointError {
  using CheckpointError::CheckpointError;
};
struct CheckpointShapeError : CheckpointError {
  using CheckpointError::CheckpointError;
};
struct CheckpointVersionError : CheckpointError {
  using CheckpointError::CheckpointError;
};

struct IdxError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IdxMagicError : IdxError {
  using IdxError::IdxError;
};
struct IdxTruncatedError : IdxError {
  using IdxError::IdxError;
};
struct IdxCountMismatch : IdxError {
  using IdxError::IdxError;
};

/// Rank correlation is undefined when one of the rank vectors is constant.
struct UndefinedCorrelation : std::domain_error {
  using std::domain_error::domain_error;
};

/// Key-value report or CSV trace that cannot be parsed.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cvnn
