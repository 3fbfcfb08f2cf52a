#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pscv {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller-supplied data violates a precondition (bad label, empty input, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Invalid hyperparameter or experiment setting.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed text. `position()` is a 0-based character offset for grammar
/// errors and a 1-based line number for file errors.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : Error(what), position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

/// Training diverged or could not start.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, int epoch, int peer)
      : Error(what), epoch_(epoch), peer_(peer) {}

  int epoch() const noexcept { return epoch_; }
  int peer() const noexcept { return peer_; }

 private:
  int epoch_;
  int peer_;
};

}  // namespace pscv
