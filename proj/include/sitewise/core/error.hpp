#pragma once

#include <stdexcept>
#include <string>

namespace sitewise {

/// Base exception for every recoverable failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the 1-based line number of the offending line (0 if unknown).
class ParseError : public Error {
public:
    ParseError(const std::string& what, int line)
        : Error(line > 0 ? what + " at line " + std::to_string(line) : what), line_(line) {}

    int line() const noexcept { return line_; }

private:
    int line_;
};

} // namespace sitewise
