#pragma once

#include <stdexcept>
#include <string>

namespace ldx {

// Invalid user-supplied parameter or configuration value.
struct ParamError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Step index outside its valid range, or bad step ordering.
struct IndexError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Mismatched vector/matrix dimensions.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values or invalid numeric state (e.g. negative radicand).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Empty or unusable input data.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed file on load (bad magic, truncation, overflow).
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A pipeline stage failed; carries the stage name for diagnostics.
struct StageError : std::runtime_error {
    std::string stage;
    StageError(std::string stage_name, const std::string& what)
        : std::runtime_error("stage '" + stage_name + "' failed: " + what),
          stage(std::move(stage_name)) {}
};

}  // namespace ldx
