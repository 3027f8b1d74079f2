#pragma once

#include <stdexcept>
#include <string>

namespace fkstat {

// Argument outside its documented domain (N=0, dt<=0, odd q where even is required, ...).
struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Operation asked of an input kind that does not support it (exact flows for
// a diffusion model, Rubin-Vitale on a non-product kernel, ...).
struct UnsupportedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A runtime invariant was violated (potential outside [0, V_inf], ...).
struct InvariantViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite state produced by a numerical step.
struct NumericalBlowup : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Regression design too ill-conditioned to fit.
struct FitDegenerate : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Requested truncation cannot meet the tolerance.
struct ToleranceNotMet : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Config file malformed or schema-invalid.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace fkstat
