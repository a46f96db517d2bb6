#pragma once

#include <stdexcept>
#include <string>

namespace rcp {

/// Raised when an input lies outside the domain an operation is defined on.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Raised when a computation produced a non-finite value or failed to converge.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The independent root scan and the analytic stability verdict disagree.
class OracleDisagreement : public NumericalError {
public:
    using NumericalError::NumericalError;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
    if (!condition) throw DomainError(message);
}

} // namespace detail
} // namespace rcp
