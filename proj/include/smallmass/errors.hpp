#pragma once

#include <stdexcept>
#include <string>

namespace smallmass {

/// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Symmetric part of the drag matrix fell below the model's spectral floor.
struct DegenerateDragError : Error {
    using Error::Error;
};

/// A coefficient field produced a non-finite value.
struct EvaluationError : Error {
    using Error::Error;
};

/// Matrix not invertible (or Lyapunov operator not sign-definite).
struct SingularMatrixError : Error {
    using Error::Error;
};

/// Two objects that must share a time grid do not.
struct GridMismatchError : Error {
    using Error::Error;
};

/// Fewer data points than a fit requires.
struct InsufficientDataError : Error {
    using Error::Error;
};

/// A specialized fast path was requested for a model that does not have the
/// required structure.
struct WrongSpecializationError : Error {
    using Error::Error;
};

/// Bad configuration file or key.
struct ParseError : Error {
    using Error::Error;
};

/// The fast momentum process diverged (non-finite state).
struct FastProcessDivergence : Error {
    using Error::Error;
};

}  // namespace smallmass
