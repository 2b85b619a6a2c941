#pragma once

#include <stdexcept>
#include <string>

namespace flip {

// Error taxonomy mirrors the CLI exit codes: parameter/config problems,
// file I/O problems, numeric contract violations, and mask overlap.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParameterError : Error {
    using Error::Error;
};

struct DimensionError : ParameterError {
    using ParameterError::ParameterError;
};

struct IoError : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

struct DisjointnessError : Error {
    using Error::Error;
};

struct EmptyMaskError : ParameterError {
    using ParameterError::ParameterError;
};

}  // namespace flip
