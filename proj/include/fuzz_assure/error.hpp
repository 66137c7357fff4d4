#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fuzz_assure {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An estimate was requested from a campaign with no test inputs (or no
/// observed species where the quantity needs at least one).
class EmptyCampaign : public Error {
public:
    explicit EmptyCampaign(const std::string& what = "empty campaign") : Error(what) {}
};

/// A residual-risk threshold outside the open interval (0, 1).
class InvalidThreshold : public Error {
public:
    explicit InvalidThreshold(const std::string& what) : Error(what) {}
};

/// Arguments violate a documented precondition.
class PreconditionViolation : public Error {
public:
    explicit PreconditionViolation(const std::string& what) : Error(what) {}
};

/// A 64-bit counter would wrap.
class CountOverflow : public Error {
public:
    explicit CountOverflow(const std::string& what = "incidence count overflow") : Error(what) {}
};

class SeriesTooShort : public Error {
public:
    explicit SeriesTooShort(const std::string& what) : Error(what) {}
};

/// The series collapses to fewer than three distinct runs; no randomness test
/// is defined. This is a diagnosis, not a rejection of IID.
class DegenerateSeries : public Error {
public:
    explicit DegenerateSeries(const std::string& what) : Error(what) {}
};

class ModelError : public Error {
public:
    explicit ModelError(const std::string& what) : Error(what) {}
};

/// Malformed campaign input. `location()` names the line number or file.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::string location, std::size_t line = 0)
        : Error(what), location_(std::move(location)), line_(line) {}

    const std::string& location() const noexcept { return location_; }
    /// 1-based line number, 0 when the error is not tied to a line.
    std::size_t line() const noexcept { return line_; }

private:
    std::string location_;
    std::size_t line_;
};

class BootstrapError : public Error {
public:
    explicit BootstrapError(const std::string& what) : Error(what) {}
};

} // namespace fuzz_assure
