#pragma once

#include <stdexcept>
#include <string>

namespace tracemerge {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A value or argument violates a documented invariant or precondition.
class InvariantError : public Error {
public:
    using Error::Error;
};

/// Configuration rejected before any work starts. `path` names the offending
/// field (e.g. "strategy.N").
class ConfigError : public Error {
public:
    ConfigError(std::string path, const std::string &what)
        : Error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}

    const std::string &path() const noexcept { return path_; }

private:
    std::string path_;
};

/// Raised by logits providers. Retryable errors are transport-class and safe
/// to repeat because providers are deterministic; fatal errors are contract
/// violations.
class BackendError : public Error {
public:
    BackendError(const std::string &what, bool retryable) : Error(what), retryable_(retryable) {}

    bool retryable() const noexcept { return retryable_; }

private:
    bool retryable_;
};

class TransportError : public BackendError {
public:
    explicit TransportError(const std::string &what) : BackendError(what, true) {}
};

class ContractError : public BackendError {
public:
    explicit ContractError(const std::string &what) : BackendError(what, false) {}
};

} // namespace tracemerge
