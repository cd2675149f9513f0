#pragma once

#include <stdexcept>
#include <string>

namespace osf {

// Shapes do not satisfy an operation's dimensional contract.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A caller-side precondition (lengths, ranges, alignment) was violated.
struct ContractError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Geometry collapsed (collinear vertices, zero-area box, singular covariance).
struct DegeneracyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed text input; message carries the offending line number.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed or unsupported binary input.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Semantically invalid input (unknown category id, bad config value).
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace osf
