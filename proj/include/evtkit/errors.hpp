#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace evtkit {

/// Malformed or invalid model input; carries the 1-based line number when known (0 otherwise).
class ModelError : public std::runtime_error {
public:
    explicit ModelError(const std::string& message, std::size_t line = 0)
        : std::runtime_error(line == 0 ? message : "line " + std::to_string(line) + ": " + message), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Invalid request parameters (e.g. epsilon outside the permitted range for a method).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A solver could not deliver its contract: iteration cap, inverted bounds, singular system.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A query whose answer is undefined for this model (e.g. conditioning on an unreachable target).
class QueryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace evtkit
