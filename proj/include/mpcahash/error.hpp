#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mpcahash {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand dimensions do not fit together.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// An argument is outside the operation's domain.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// A numerical routine failed (non-convergence, indefinite scatter, ...).
class NumericError : public Error {
public:
    using Error::Error;
};

/// The requested problem size exceeds a hard limit.
class CapacityError : public Error {
public:
    using Error::Error;
};

/// Malformed binary file. `offset` is the first byte that could not be accepted.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::uint64_t offset)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
          offset_(offset) {}

    [[nodiscard]] std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

} // namespace mpcahash
