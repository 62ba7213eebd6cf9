#pragma once

#include <stdexcept>
#include <string>

namespace heatlab {

enum class ErrorKind {
    invalid_profile,
    invalid_parameter,
    singular_point,
    domain,
    unsupported_dimension,
    precondition,
    engine,
    empty_fit,
    insufficient_paths,
    mismatched_grid,
    config,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::invalid_profile: return "invalid-profile";
        case ErrorKind::invalid_parameter: return "invalid-parameter";
        case ErrorKind::singular_point: return "singular-point";
        case ErrorKind::domain: return "domain";
        case ErrorKind::unsupported_dimension: return "unsupported-dimension";
        case ErrorKind::precondition: return "precondition";
        case ErrorKind::engine: return "engine";
        case ErrorKind::empty_fit: return "empty-fit";
        case ErrorKind::insufficient_paths: return "insufficient-paths";
        case ErrorKind::mismatched_grid: return "mismatched-grid";
        case ErrorKind::config: return "config";
    }
    return "unknown";
}

/// Error raised by every heatlab routine. The kind drives CLI exit codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

}  // namespace heatlab
