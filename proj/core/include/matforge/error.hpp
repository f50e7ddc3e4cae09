#pragma once

#include <stdexcept>
#include <string>

namespace matforge {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file. `line()` is 1-based, or 0 when not line-oriented.
class ParseError : public Error {
public:
    ParseError(const std::string &what, int line = 0)
        : Error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Gradient or tape produced against a different parameter version.
class VersionMismatch : public Error {
public:
    using Error::Error;
};

class ShapeMismatch : public Error {
public:
    using Error::Error;
};

}  // namespace matforge
