#pragma once

#include <stdexcept>
#include <string>

namespace twophoton {

// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Inconsistent apparatus/pump/scenario configuration, or a bad config file line.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A least-squares fit that did not produce a usable result.
class FitError : public std::runtime_error {
public:
    FitError(const std::string& what, std::string diagnostics = {})
        : std::runtime_error(what), diagnostics_(std::move(diagnostics)) {}

    const std::string& diagnostics() const noexcept { return diagnostics_; }

private:
    std::string diagnostics_;
};

} // namespace twophoton
