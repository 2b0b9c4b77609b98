#pragma once

#include <stdexcept>
#include <string>

namespace fga {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid or mismatched tensor shapes.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

/// Invalid argument values (bad rates, strides, kernel sizes, ...).
class ValueError : public Error {
public:
    explicit ValueError(const std::string& msg) : Error(msg) {}
};

/// Autodiff misuse: node ids that do not belong to the tape, non-scalar loss.
class TapeError : public Error {
public:
    explicit TapeError(const std::string& msg) : Error(msg) {}
};

/// File and serialization failures.
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

} // namespace fga
