#pragma once

#include <stdexcept>
#include <string>

namespace npprov {

// Caller broke a documented precondition (shape mismatch, non-scalar loss, ...).
struct ContractViolation : std::logic_error {
    using std::logic_error::logic_error;
};

// A computation left the finite domain (NaN/Inf in a primitive output).
struct NumericFault : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Input is structurally valid but unusable: singular covariance after jitter
// escalation, no usable clip window, zero-width interval.
struct DegenerateInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed external data; message carries line number or byte offset.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Parse succeeded but produced nothing usable.
struct EmptyDataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Filesystem-level failures.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Checkpoint load failures, one class per failure mode.
struct BadMagicError : IoError {
    using IoError::IoError;
};
struct BadVersionError : IoError {
    using IoError::IoError;
};
struct TruncatedError : IoError {
    using IoError::IoError;
};

}  // namespace npprov
