#pragma once

#include <stdexcept>
#include <string>

namespace evtc {

// Error categories; the CLI maps each to a distinct exit code.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad scenario/generator parameters or option combinations.
struct ConfigError : Error {
    using Error::Error;
};

// Malformed or inconsistent input data (files, references between tables).
struct DataError : Error {
    using Error::Error;
};

// A workflow stage was requested before the stages it depends on have run.
struct StageOrderError : Error {
    using Error::Error;
};

// Solver failures: non-convergence where convergence is required, singular
// component parameters.
struct NumericError : Error {
    using Error::Error;
};

// Destination edge cannot be reached from a vehicle's origin.
struct UnreachableError : DataError {
    using DataError::DataError;
};

} // namespace evtc
