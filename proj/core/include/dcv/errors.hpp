#pragma once

#include <stdexcept>
#include <string>

namespace dcv {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible or malformed tensor shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Out-of-domain scalar parameter (even kernel size, sigma <= 0, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// API misuse: backward on a detached value, mixing tapes, cross-thread use.
class UsageError : public Error {
 public:
  using Error::Error;
};

// A geometric estimate could not be formed (singular system, degenerate input).
class EstimationError : public Error {
 public:
  using Error::Error;
};

// RANSAC found no model supported by enough inliers.
class NoConsensusError : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

class DegeneratePointError : public Error {
 public:
  using Error::Error;
};

class BehindCameraError : public Error {
 public:
  using Error::Error;
};

// Loss became non-finite during an optimization loop.
class OptimizationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace dcv
