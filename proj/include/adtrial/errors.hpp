#pragma once

#include <stdexcept>
#include <string>

namespace adtrial {

struct TrialError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain (e.g. quantile of p <= 0).
struct DomainError : TrialError {
    using TrialError::TrialError;
};

// p1 == p2: Eq-style sample size is undefined; the engine maps this to futility.
struct DegenerateIncidenceError : TrialError {
    using TrialError::TrialError;
};

struct EmptyCohortError : TrialError {
    using TrialError::TrialError;
};

struct AllZeroRatesError : TrialError {
    using TrialError::TrialError;
};

struct NonpositiveBudgetError : TrialError {
    using TrialError::TrialError;
};

struct DuplicateDeployError : TrialError {
    using TrialError::TrialError;
};

struct UnknownStageError : TrialError {
    using TrialError::TrialError;
};

struct SchemaViolationError : TrialError {
    using TrialError::TrialError;
};

struct StorageError : TrialError {
    using TrialError::TrialError;
};

struct ConfigError : TrialError {
    using TrialError::TrialError;
};

// Malformed document, as opposed to a well-formed one violating an invariant.
struct ParseError : ConfigError {
    using ConfigError::ConfigError;
};

struct ReportError : TrialError {
    using TrialError::TrialError;
};

}  // namespace adtrial
