#pragma once

#include <stdexcept>
#include <string>

namespace cavion {

// Invalid numeric input to a physics or analysis routine.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Requested population exceeds the configured maximum.
class CapacityError : public std::length_error {
public:
    using std::length_error::length_error;
};

// Time integration left the physical state space even after step refinement.
class IntegrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A normalized statistic has a zero denominator (no counts, zero background).
class NormalizationError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Malformed user input: config files, CSV data. Carries the offending key or line.
class InputError : public std::invalid_argument {
public:
    InputError(std::string where, const std::string& what)
        : std::invalid_argument(where.empty() ? what : where + ": " + what),
          where_(std::move(where)) {}

    const std::string& where() const noexcept { return where_; }

private:
    std::string where_;
};

} // namespace cavion
