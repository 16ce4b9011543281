#pragma once

#include <stdexcept>
#include <string>

namespace stresstomo {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: wrong shapes, mismatched grids, bad parameters.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A solvability condition on the material parameters fails.
class ConditionError : public Error {
 public:
  using Error::Error;
};

/// The inverse problem has a nontrivial null space for the given parameters.
class NonUniqueError : public ConditionError {
 public:
  using ConditionError::ConditionError;
};

/// A numerical procedure failed (non-convergence, trapped ray, lost unitarity).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace stresstomo
