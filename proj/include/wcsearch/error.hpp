#pragma once

#include <stdexcept>
#include <string>

namespace wcsearch {

// Root of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input does not satisfy a documented precondition (bounds, dimensions, names).
class ValidationError : public Error {
public:
    using Error::Error;
};

// A requested design or run does not fit the configured size limits.
class BudgetError : public Error {
public:
    using Error::Error;
};

// No design of the requested size can be built; `suggested` is the next valid size.
class CapabilityError : public Error {
public:
    CapabilityError(const std::string& what, std::size_t suggested)
        : Error(what), suggested_(suggested) {}
    std::size_t suggested() const noexcept { return suggested_; }

private:
    std::size_t suggested_;
};

class ConditioningError : public Error {
public:
    using Error::Error;
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
};

// Every candidate in the pool duplicates an already simulated point.
class ExhaustionError : public Error {
public:
    using Error::Error;
};

class DegenerateResponseError : public Error {
public:
    using Error::Error;
};

class OracleUnstableError : public Error {
public:
    using Error::Error;
};

class UnsupportedBackendError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Simulator faults. The three concrete kinds are distinct types so callers
// can tell a simulator-reported error from a broken or silent channel.
class SimulatorFault : public Error {
public:
    using Error::Error;
};

class SimulatorErrorReply : public SimulatorFault {
public:
    explicit SimulatorErrorReply(std::string message)
        : SimulatorFault("simulator reported error: " + message), message_(std::move(message)) {}
    const std::string& message() const noexcept { return message_; }

private:
    std::string message_;
};

class SimulatorTimeout : public SimulatorFault {
public:
    using SimulatorFault::SimulatorFault;
};

class MalformedReply : public SimulatorFault {
public:
    using SimulatorFault::SimulatorFault;
};

}  // namespace wcsearch
