#pragma once

#include <stdexcept>
#include <string>

namespace utfe {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes disagree with what an operation requires.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A precondition on a scalar argument or configuration failed.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Malformed external data (PGM, feature text, experiment files).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Training diverged or was asked to do something impossible.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace utfe
