#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ssdkit {

// Bad parameter or precondition violation.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// An operation that needs at least one sample/record received none.
class EmptyInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A record is well-formed but violates a data invariant.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A file could not be opened, read or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input text. line() is 1-based; 0 when unknown.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what)
        , line_(line)
    {
    }

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace ssdkit
