#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace esp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An argument violates an operation's precondition (bad kernel, bad config, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Two fields or masks that must share a shape do not.
class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// Moment fitting was asked to fit a membership with no usable mass.
class DegenerateMass : public Error {
public:
    using Error::Error;
};

/// A metric is undefined for its inputs (e.g. an empty boundary).
class UndefinedMetric : public Error {
public:
    using Error::Error;
};

/// A covariance matrix could not be factorized.
class SingularMatrix : public Error {
public:
    using Error::Error;
};

/// A non-finite value appeared inside the solver loop.
class NumericalError : public Error {
public:
    NumericalError(std::size_t iteration, const std::string& what)
        : Error("non-finite value at iteration " + std::to_string(iteration) + ": " + what),
          iteration_(iteration) {}

    std::size_t iteration() const noexcept { return iteration_; }

private:
    std::size_t iteration_;
};

/// File or stream could not be read or written.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace esp
