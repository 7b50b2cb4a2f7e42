#pragma once

#include <stdexcept>
#include <string>

namespace nfsim {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SingularityError : public NumericalError {
public:
    SingularityError(const std::string& what, std::size_t dst_index, std::size_t src_index)
        : NumericalError(what), dst_index(dst_index), src_index(src_index) {}
    std::size_t dst_index;
    std::size_t src_index;
};

class GridMismatchError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Raised when a PSF cut has no usable half-maximum crossing or no interior peak.
class MeasurementError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class IdentifiabilityError : public std::runtime_error {
public:
    IdentifiabilityError(const std::string& what, std::string coefficient)
        : std::runtime_error(what), coefficient(std::move(coefficient)) {}
    std::string coefficient;
};

}  // namespace nfsim
