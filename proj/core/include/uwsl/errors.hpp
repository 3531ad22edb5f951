// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace uwsl {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A precondition on an argument value was violated (NaN, out of range, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Input geometry admits no unique answer (rank-deficient, mirrored, parallel).
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

/// An iterative scheme moved away from the solution.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// The motion set does not constrain all degrees of freedom.
class ObservabilityError : public Error {
 public:
  using Error::Error;
};

/// Linear algebra failed numerically; carries the offending condition number.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, double condition_number)
      : Error(what), condition_number(condition_number) {}
  double condition_number = 0.0;
};

/// Ray and plane do not meet.
class NoIntersectionError : public Error {
 public:
  using Error::Error;
};

/// Triangulated depth is non-positive.
class BehindCameraError : public Error {
 public:
  using Error::Error;
};

/// Required fused-velocity sample is missing; carries the time gap.
class StaleVelocityError : public Error {
 public:
  StaleVelocityError(const std::string& what, double gap_seconds)
      : Error(what), gap_seconds(gap_seconds) {}
  double gap_seconds = 0.0;
};

/// Registration found no usable correspondences.
class NoOverlapError : public Error {
 public:
  using Error::Error;
};

/// Recovered points contradict the observation model beyond tolerance.
class InconsistentObservationError : public Error {
 public:
  using Error::Error;
};

/// Scene or scenario description is self-contradictory.
class InvalidSpecError : public Error {
 public:
  using Error::Error;
};

/// Configuration file or command line is malformed.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace uwsl
