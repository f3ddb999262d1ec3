#pragma once

#include <stdexcept>
#include <string>

namespace jlssabs {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonSquareError : Error { using Error::Error; };
struct NotSymmetricError : Error { using Error::Error; };
struct NotPdError : Error { using Error::Error; };
struct DimensionMismatchError : Error { using Error::Error; };
struct SingularOperatorError : Error { using Error::Error; };
struct SingularGramError : Error { using Error::Error; };
struct InvalidNetworkError : Error { using Error::Error; };
struct ConditionViolatedError : Error { using Error::Error; };
struct Con3UnsatisfiableError : Error { using Error::Error; };
struct Con3deViolatedError : Error { using Error::Error; };
struct NotConvergedError : Error { using Error::Error; };
struct MissingGainsError : Error { using Error::Error; };
struct CertificateInvalidError : Error { using Error::Error; };
struct TooFewTrialsError : Error { using Error::Error; };
struct InvalidArgsError : Error { using Error::Error; };
struct NegativeInputError : Error { using Error::Error; };
struct ConfigInvalidError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };

/// Small-gain failure; carries the offending spectral radius.
struct InfeasibleError : Error {
    explicit InfeasibleError(const std::string& msg, double value = 0.0)
        : Error(msg), value(value) {}
    double value;
};

}  // namespace jlssabs
