#pragma once

#include <stdexcept>
#include <string>

namespace vcx {

// Base for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor dimensions do not match what an operation requires.
struct ShapeError : Error {
    using Error::Error;
};

// Invalid configuration value (bad range, degenerate setting, unknown key).
struct ConfigError : Error {
    using Error::Error;
};

// Value outside its documented domain (e.g. pixel outside [0,1]).
struct RangeError : Error {
    using Error::Error;
};

// Archive bytes are not a valid .ldvt file.
struct ArchiveError : Error {
    using Error::Error;
};

// Archive is structurally valid but uses an unknown version or dtype code.
struct VersionError : ArchiveError {
    using ArchiveError::ArchiveError;
};

// Bad conditioning input: unknown class id, non-finite target, no alternative class.
struct ConditionError : Error {
    using Error::Error;
};

// Non-finite values showed up where finite math was expected.
struct NumericError : Error {
    using Error::Error;
};

// Training diverged; the model object holds the last finite parameter snapshot.
struct TrainingError : NumericError {
    using NumericError::NumericError;
};

// Timestep ordering violated (t_prev >= t).
struct OrderingError : Error {
    using Error::Error;
};

// Required persisted state is missing (e.g. a run without its z_T tensor).
struct StateError : Error {
    using Error::Error;
};

// Component checkpoints are mutually incompatible (hash mismatch).
struct CompatError : Error {
    using Error::Error;
};

// Metric is undefined for the given inputs (empty set, zero variance, too few vectors).
struct MetricError : Error {
    using Error::Error;
};

} // namespace vcx
