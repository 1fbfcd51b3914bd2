#pragma once

#include <stdexcept>
#include <string>

namespace planprobe {

/// Base class for every error raised by the library. `exit_code()` maps the
/// error onto the CLI's documented process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

/// Invalid configuration value or unknown key.
class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

/// Malformed or incompatible data files (checkpoints, replays, pair lists).
class DataError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

/// Checkpoint/replay/model schema mismatch.
class CompatibilityError : public DataError {
 public:
  using DataError::DataError;
};

/// Non-finite values or numeric failures.
class NumericError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// API misuse, e.g. stepping a finished environment.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace planprobe
