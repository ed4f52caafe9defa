#pragma once

#include <stdexcept>

namespace tsf {

// Shape or extent disagreement between operands.
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// An API precondition was violated by the caller.
struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A fixed capacity (e.g. the positional-encoding table length) was exceeded.
struct CapacityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values where finite ones are required (divergent loss, NaN input).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File-level failure: missing, unreadable, unwritable.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File exists but its contents are damaged or truncated.
struct IntegrityError : IoError {
    using IoError::IoError;
};

// File is readable but disagrees with the expected document structure.
struct SchemaError : IoError {
    using IoError::IoError;
};

}  // namespace tsf
