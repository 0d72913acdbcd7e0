#pragma once

#include <stdexcept>
#include <string>

namespace bdfns {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidOrderError : public Error {
public:
    using Error::Error;
};

/// An iterative numerical procedure did not reach its requested accuracy.
class NumericalFailure : public Error {
public:
    using Error::Error;
};

class DegenerateNodesError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& path, int line, const std::string& what)
        : Error(path + ":" + std::to_string(line) + ": " + what), line_(line)
    {
    }

    [[nodiscard]] int line() const noexcept { return line_; }

private:
    int line_;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class SingularMatrixError : public NumericalFailure {
public:
    using NumericalFailure::NumericalFailure;
};

/// Newton did not converge, or a linear solve missed its residual bound.
class StepFailure : public NumericalFailure {
public:
    StepFailure(double t, const std::string& what)
        : NumericalFailure("step to t=" + std::to_string(t) + " failed: " + what), time_(t)
    {
    }

    [[nodiscard]] double time() const noexcept { return time_; }

private:
    double time_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// An operation was called on an object that is not in a usable state.
class StateError : public Error {
public:
    using Error::Error;
};

} // namespace bdfns
