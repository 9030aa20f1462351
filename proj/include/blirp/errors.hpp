#pragma once

#include <stdexcept>
#include <string>

namespace blirp {

// Raised when a schedule, config, or input set fails validation.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when an otherwise valid computation degenerates numerically
// (e.g. a restriction leaves an inner sum with no terms).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace blirp
