#pragma once

#include <stdexcept>
#include <string>

namespace hirsute {

// Malformed or inconsistent input data (manifests, embeddings, masks, caches).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid arguments or configuration values.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A threshold cannot be calibrated or evaluated as requested.
class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A rate was requested exactly at a threshold the retained score tail does
// not cover.
class TailCoverageError : public CalibrationError {
 public:
  using CalibrationError::CalibrationError;
};

}  // namespace hirsute
