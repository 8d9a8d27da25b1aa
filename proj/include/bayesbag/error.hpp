#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bayesbag {

/// Factorization of a matrix that must be symmetric positive definite failed.
class SingularMatrixError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An exact enumeration would exceed the configured number of terms.
class EnumerationCapError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A quantity is undefined for the given parameters (e.g. a variance with a_n <= 1).
class UndefinedMomentError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/** Failure inside one bootstrap replicate.  Carries the replicate index so that callers running
 * hundreds of replicates in parallel can tell which one broke.
 */
class ReplicateError : public std::runtime_error {
public:
    ReplicateError(std::size_t replicate, const std::string& what)
        : std::runtime_error("replicate " + std::to_string(replicate) + ": " + what),
          replicate_{replicate} {}

    std::size_t replicate() const noexcept { return replicate_; }

private:
    std::size_t replicate_;
};

}  // namespace bayesbag
