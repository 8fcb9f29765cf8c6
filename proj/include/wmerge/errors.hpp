#pragma once

#include <stdexcept>
#include <string>

namespace wmerge {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dimension mismatch between operands; message names both shapes.
struct ShapeError : Error {
    using Error::Error;
};

// Invalid argument value (out-of-range count, empty list, ...).
struct ArgumentError : Error {
    using Error::Error;
};

// All-zero relevance map or similar degenerate weight input.
struct DegenerateMapError : Error {
    using Error::Error;
};

// Requested an operation the gradient engine does not support.
struct CapabilityError : Error {
    using Error::Error;
};

// Malformed checkpoint / manifest bytes.
struct FormatError : Error {
    using Error::Error;
};

// Record-level data problem (missing embeddings etc.).
struct DataError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

// Non-finite loss or other numeric failure during training.
struct NumericError : Error {
    using Error::Error;
};

// Scene placement failed after bounded retries.
struct GenerationError : Error {
    using Error::Error;
};

// Evaluation harness could not produce a score (all prompts skipped).
struct HarnessError : Error {
    using Error::Error;
};

}  // namespace wmerge
