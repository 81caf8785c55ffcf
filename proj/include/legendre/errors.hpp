#pragma once

#include <stdexcept>
#include <string>

namespace legendre {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// tensor-core
struct ShapeMismatch : Error { using Error::Error; };
struct AllZeroTensor : Error { using Error::Error; };
struct NegativeEntry : Error { using Error::Error; };
struct SupportViolation : Error { using Error::Error; };

// poset-basis
struct DimensionMismatch : Error { using Error::Error; };
struct EmptySupport : Error { using Error::Error; };
struct InvalidCoreSize : Error { using Error::Error; };

// engine
struct OverflowGuard : Error { using Error::Error; };
struct SingularSystem : Error { using Error::Error; };
struct NonFiniteState : Error { using Error::Error; };
struct ConvergenceFailure : Error { using Error::Error; };
struct UnknownScheme : Error { using Error::Error; };

// metrics-clustering
struct LengthMismatch : Error { using Error::Error; };
struct TooFewSamples : Error { using Error::Error; };
struct BadK : Error { using Error::Error; };
struct UnknownKind : Error { using Error::Error; };

// cli / io
struct IoError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };

}  // namespace legendre
