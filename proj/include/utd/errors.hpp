#pragma once

#include <stdexcept>
#include <string>

namespace utd {

// Root of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad argument: unrecorded step, mismatched shapes, empty inputs.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Step index (or similar) outside its admissible range.
class RangeError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

// A value object failed its invariants (mixture spec, config, holdout).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Data with no spread cannot be normalized.
class DegenerateDataError : public Error {
 public:
  using Error::Error;
};

// Malformed or non-finite on-disk content.
class LoadError : public Error {
 public:
  using Error::Error;
};

// Numerical breakdown carrying the step index where it happened.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, long step) : Error(what), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

class TrainingFailure : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class PropagationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace utd
