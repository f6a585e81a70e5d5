#pragma once

#include <stdexcept>
#include <string>

namespace siwforge {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the domain of an operation (non-positive frequency,
/// violated type invariant, malformed option).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Degenerate or colliding geometry.
class GeometryError : public Error {
public:
    using Error::Error;
};

/// A via-pitch/diameter design rule that synthesis must satisfy is violated.
class DesignRuleError : public GeometryError {
public:
    using GeometryError::GeometryError;
};

/// Request that the modeled physics cannot honor.
class PhysicsError : public Error {
public:
    using Error::Error;
};

/// A required mode is evanescent at the requested frequency.
class ModeCutoffError : public PhysicsError {
public:
    ModeCutoffError(const std::string& what, double cutoff_hz)
        : PhysicsError(what), cutoff_hz_(cutoff_hz) {}
    double cutoff_hz() const noexcept { return cutoff_hz_; }

private:
    double cutoff_hz_;
};

/// The band admits a second propagating mode.
class BandTooWideError : public PhysicsError {
public:
    using PhysicsError::PhysicsError;
};

/// Device kind whose physics the 2-D isotropic solver does not model (ferrite).
class UnsupportedPhysicsError : public PhysicsError {
public:
    using PhysicsError::PhysicsError;
};

class NumericError : public Error {
public:
    using Error::Error;
};

/// Problem size exceeds the configured memory cap.
class ResourceError : public NumericError {
public:
    using NumericError::NumericError;
};

/// Malformed input document; line is 1-based, 0 when not line-oriented.
class ParseError : public Error {
public:
    ParseError(int line, const std::string& message)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + message : message),
          line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

}  // namespace siwforge
