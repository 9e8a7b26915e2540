#pragma once

#include <stdexcept>
#include <string>

namespace stad {

// Input failed a schema or invariant check. CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem / codec failure. CLI maps this to exit code 2.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Requested an analytic derivative at a point where the function has a kink.
class NonDifferentiableError : public std::runtime_error {
public:
    explicit NonDifferentiableError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace stad
