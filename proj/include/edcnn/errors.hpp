#pragma once

#include <stdexcept>
#include <string>

namespace edcnn {

// Error taxonomy. The CLI maps InvalidArgument/DimensionError/StructuralError/ParseError
// to exit code 1 and NumericalFailure to exit code 2.

class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Width chain or layer shape inconsistency in a network description.
class StructuralError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed serialized payload. `position()` is the byte offset where parsing failed,
/// or npos when the failure is semantic rather than syntactic.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t position = std::string::npos)
        : std::runtime_error(what), position_(position) {}
    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

}  // namespace edcnn
