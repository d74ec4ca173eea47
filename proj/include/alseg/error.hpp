#pragma once

#include <stdexcept>
#include <string>

namespace alseg {

// Argument violates an operation's precondition (std::invalid_argument is
// used directly for that case); the types below name the remaining failure
// classes so callers can map them to exit codes.

/// Tensor dimensions are incompatible with the requested operation.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input container could not be decoded.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Decoded data violates a domain invariant (e.g. non-binary mask).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A sample was queried that is already labeled.
class DoubleQueryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Training produced a non-finite loss.
class DivergedTraining : public std::runtime_error {
 public:
  DivergedTraining(int epoch, int batch, const std::string& what)
      : std::runtime_error(what), epoch_(epoch), batch_(batch) {}
  int epoch() const noexcept { return epoch_; }
  int batch() const noexcept { return batch_; }

 private:
  int epoch_;
  int batch_;
};

}  // namespace alseg
