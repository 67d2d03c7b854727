#pragma once

#include <stdexcept>
#include <string>

namespace endofair {

// Thrown when an iteration diverges, a loss turns non-finite, or a solver
// fails to converge where a result is required. CLI maps this to exit 3.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem / serialization failures. CLI maps this to exit 4.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Config file rejected by schema or semantic validation. CLI maps this to exit 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace endofair
