#pragma once

#include <cstddef>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace l1bsde {

enum class ErrorCode {
    invalid_argument,
    dimension_too_large,
    zero_steps,
    step_out_of_range,
    sentinel_encountered,
    missing_parameter,
    crossed_barriers,
    empty_search_domain,
    non_contraction,
    non_convergence,
    terminal_inconsistency,
    monotonicity_violation,
    divergence,
    singular_regression,
    parse_error,
    validation_error,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::dimension_too_large: return "dimension-too-large";
    case ErrorCode::zero_steps: return "zero-steps";
    case ErrorCode::step_out_of_range: return "step-out-of-range";
    case ErrorCode::sentinel_encountered: return "sentinel-encountered";
    case ErrorCode::missing_parameter: return "missing-parameter";
    case ErrorCode::crossed_barriers: return "crossed-barriers";
    case ErrorCode::empty_search_domain: return "empty-search-domain";
    case ErrorCode::non_contraction: return "non-contraction";
    case ErrorCode::non_convergence: return "non-convergence";
    case ErrorCode::terminal_inconsistency: return "terminal-inconsistency";
    case ErrorCode::monotonicity_violation: return "monotonicity-violation";
    case ErrorCode::divergence: return "divergence";
    case ErrorCode::singular_regression: return "singular-regression";
    case ErrorCode::parse_error: return "parse-error";
    case ErrorCode::validation_error: return "validation-error";
    }
    return "unknown";
}

/// Base exception for every failure raised by the library. The code is
/// stable and machine-readable; the message is for humans.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Location of a lattice node (or of a path, on the Monte Carlo backend).
struct NodeRef {
    std::size_t step = 0;
    std::size_t node = 0;
};

inline std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

inline std::string describe(NodeRef ref) {
    return "(step " + std::to_string(ref.step) + ", node " + std::to_string(ref.node) + ")";
}

class NonContractionError : public Error {
public:
    NonContractionError(double a_dt, std::size_t required_steps)
        : Error(ErrorCode::non_contraction,
                "A*dt = " + sci(a_dt) + " >= 1; need n_steps >= " +
                    std::to_string(required_steps)),
          required_steps_(required_steps) {}

    std::size_t required_steps() const noexcept { return required_steps_; }

private:
    std::size_t required_steps_;
};

class NonConvergenceError : public Error {
public:
    NonConvergenceError(NodeRef where, double residual)
        : Error(ErrorCode::non_convergence,
                "implicit step failed at " + describe(where) + ", residual " + sci(residual)),
          where_(where), residual_(residual) {}

    NodeRef where() const noexcept { return where_; }
    double residual() const noexcept { return residual_; }

private:
    NodeRef where_;
    double residual_;
};

class NodeError : public Error {
public:
    NodeError(ErrorCode code, NodeRef where, const std::string& what)
        : Error(code, what + " at " + describe(where)), where_(where) {}

    NodeRef where() const noexcept { return where_; }

private:
    NodeRef where_;
};

class ParseError : public Error {
public:
    ParseError(std::size_t position, const std::string& what)
        : Error(ErrorCode::parse_error, "at position " + std::to_string(position) + ": " + what),
          position_(position) {}

    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

} // namespace l1bsde
