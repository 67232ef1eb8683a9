#pragma once

#include <stdexcept>
#include <string>

namespace projlab {

// Violated operation precondition. CLI exit code 2.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Argument outside the domain of a function (angle off a curve, s too large).
class DomainError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

// Grid or sampling too coarse for the requested scale. CLI exit code 3.
class ResolutionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Memory or atom budget exceeded. CLI exit code 3.
class ResourceError : public ResolutionError {
 public:
  using ResolutionError::ResolutionError;
};

}  // namespace projlab
