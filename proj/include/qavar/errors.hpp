// Error types shared by the qavar library and CLI.
#pragma once

#include <stdexcept>
#include <string>

namespace qavar {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A dense numerical routine failed (non-convergence, non-PSD covariance).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Requested problem exceeds the configured dimension cap.
class ResourceError : public std::runtime_error {
public:
    ResourceError(const std::string &what, int offending_k)
        : std::runtime_error(what), offending_k_(offending_k) {}

    int offending_k() const noexcept { return offending_k_; }

private:
    int offending_k_;
};

} // namespace qavar
