#pragma once

#include <stdexcept>
#include <string>

namespace stabcert {

/// Bad user input: invalid parameters, malformed files, violated
/// preconditions. The CLI maps these to exit status 1.
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Query outside the domain of a tabulated function.
class DomainError : public ParameterError {
public:
    using ParameterError::ParameterError;
};

/// Operation requested on a certificate whose checks did not all pass.
class CertificateInvalid : public ParameterError {
public:
    using ParameterError::ParameterError;
};

/// A user-supplied function broke its stated contract on the sample grid
/// (e.g. mu <= 0 or mu' < 0).
class SpecInvariantError : public ParameterError {
public:
    using ParameterError::ParameterError;
};

/// The requested model kind is not supported by the operation.
class Unsupported : public ParameterError {
public:
    using ParameterError::ParameterError;
};

/// Example preconditions not met: the semigroup e^{tA} looks unbounded.
class UnboundedSemigroup : public ParameterError {
public:
    using ParameterError::ParameterError;
};

/// No admissible parameter exists inside the search range.
class Infeasible : public ParameterError {
public:
    using ParameterError::ParameterError;
};

/// A certified bound was breached. This signals a bug, never bad data;
/// the CLI maps it to exit status 2.
class InvariantViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace stabcert
