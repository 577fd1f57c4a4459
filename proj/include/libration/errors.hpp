#pragma once

#include <stdexcept>
#include <string>

namespace libration {

/// The potential or deformation violates the invariant-plane conditions.
class HypothesisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Root finding, event detection or integration failed.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The monodromy matrix is (numerically) the identity, so no adapted frame
/// with a nonzero twist exists.
class DegenerateFrameError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A flow-derivative entry outside the supported index patterns was requested.
class UnsupportedIndexError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Invalid problem definition or command-line override.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace libration
