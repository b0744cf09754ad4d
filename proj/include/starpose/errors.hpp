#pragma once

#include <stdexcept>
#include <string>

namespace starpose {

// Bad input data: unreadable files, malformed formats, failed validation.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failures: degenerate geometry, non-finite losses, invalid ranges.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonPositiveDepth : NumericalError {
  int joint_index;
  explicit NonPositiveDepth(int j)
      : NumericalError("joint " + std::to_string(j) +
                       " is at or behind the camera plane"),
        joint_index(j) {}
};

struct DegenerateConfiguration : NumericalError {
  using NumericalError::NumericalError;
};

// Programming-contract violations (wrong shapes, inconsistent dimensions).
struct ShapeMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace starpose
