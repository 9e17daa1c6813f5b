#pragma once

#include <stdexcept>
#include <string>

namespace qwalk {

// Invalid parameters, manifests, or input files. CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// A numerical consistency check failed (norm drift, bad eigenvalue, ...).
// CLI maps this to exit code 3.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Walker outgrew its preallocated position window.
class CapacityError : public ConfigError {
public:
    explicit CapacityError(const std::string& msg) : ConfigError(msg) {}
};

}  // namespace qwalk
