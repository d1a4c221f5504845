#pragma once

#include <stdexcept>
#include <string>

namespace graphage {

// Invalid configuration: bad hyperparameters, mismatched shapes at setup time.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape disagreement in an operation.
class ShapeError : public ConfigError {
public:
    explicit ShapeError(const std::string& msg) : ConfigError(msg) {}
};

// Bad or missing input data (labels, files).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// NaN/Inf encountered in a forward pass, or gradient verification failure.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace graphage
