#pragma once

#include <stdexcept>
#include <string>

namespace sercomp {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A transfer function was evaluated at (or numerically on) one of its poles.
class PoleError : public Error {
public:
    using Error::Error;
};

/// The DPC decoupling matrix cannot be inverted because the sending bus collapsed.
class SingularityError : public Error {
public:
    using Error::Error;
};

/// Requested flow exceeds what the line can carry. `limit()` is the computed bound in W.
class CapabilityError : public Error {
public:
    CapabilityError(const std::string& what, double limit)
        : Error(what), limit_(limit) {}
    double limit() const noexcept { return limit_; }

private:
    double limit_;
};

/// Integration produced a non-finite state. `time()` is the simulation time of failure.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, double time)
        : Error(what), time_(time) {}
    double time() const noexcept { return time_; }

private:
    double time_;
};

class NoSignalError : public Error {
public:
    using Error::Error;
};

class InsufficientCyclesError : public Error {
public:
    using Error::Error;
};

class DegenerateComparisonError : public Error {
public:
    using Error::Error;
};

}  // namespace sercomp
