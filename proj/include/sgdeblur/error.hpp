#pragma once

#include <stdexcept>
#include <string>

namespace sgdeblur {

/// Precondition or argument violation (bad sizes, out-of-range config values).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A file exists but could not be decoded as an image.
class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem level failure: missing file, unwritable path, short read.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Checkpoint written by an incompatible format version.
class IncompatibleCheckpoint : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced a NaN or infinite loss.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int scale, int iteration, const std::string& what)
      : std::runtime_error("non-finite " + what + " at scale " + std::to_string(scale) +
                           ", iteration " + std::to_string(iteration)),
        scale_(scale),
        iteration_(iteration) {}

  int scale() const { return scale_; }
  int iteration() const { return iteration_; }

 private:
  int scale_;
  int iteration_;
};

}  // namespace sgdeblur
