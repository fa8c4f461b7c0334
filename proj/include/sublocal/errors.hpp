#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sublocal {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical precondition was violated (bad grid, bad cutoff, CFL, ...).
class PreconditionError : public Error {
public:
    using Error::Error;
};

class InvalidParameter : public PreconditionError {
public:
    using PreconditionError::PreconditionError;
};

class UndefinedTime : public PreconditionError {
public:
    using PreconditionError::PreconditionError;
};

class InsufficientCoverage : public PreconditionError {
public:
    using PreconditionError::PreconditionError;
};

class IntervalMismatch : public PreconditionError {
public:
    using PreconditionError::PreconditionError;
};

class CutoffTooSmall : public PreconditionError {
public:
    using PreconditionError::PreconditionError;
};

class DimensionMismatch : public PreconditionError {
public:
    using PreconditionError::PreconditionError;
};

class CflViolation : public PreconditionError {
public:
    using PreconditionError::PreconditionError;
};

class MarginViolation : public PreconditionError {
public:
    using PreconditionError::PreconditionError;
};

/// Raised when a branch table cannot be put in two-local form.
class NotTwoLocal : public Error {
public:
    NotTwoLocal(std::size_t r, std::size_t s, double magnitude, double tolerance)
        : Error("branch (" + std::to_string(r) + "," + std::to_string(s) +
                ") has |cross phase| = " + std::to_string(magnitude) +
                " above tolerance " + std::to_string(tolerance)),
          r_(r), s_(s), magnitude_(magnitude), tolerance_(tolerance) {}

    std::size_t r() const noexcept { return r_; }
    std::size_t s() const noexcept { return s_; }
    double magnitude() const noexcept { return magnitude_; }
    double tolerance() const noexcept { return tolerance_; }

private:
    std::size_t r_, s_;
    double magnitude_, tolerance_;
};

/// Scenario configuration could not be parsed or validated. `key()` points at
/// the offending entry as "section.key" (or the section name alone).
class ConfigError : public Error {
public:
    ConfigError(std::string key, const std::string& what)
        : Error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

} // namespace sublocal
