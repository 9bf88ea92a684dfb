#include "symlab/error.hpp"

#include <cstdio>

namespace symlab {
namespace {

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

}  // namespace

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidInput: return "InvalidInput";
        case ErrorKind::NotPsd: return "NotPsd";
        case ErrorKind::TooLarge: return "TooLarge";
        case ErrorKind::SolverFailure: return "SolverFailure";
        case ErrorKind::HypothesisViolated: return "HypothesisViolated";
        case ErrorKind::DegenerateInput: return "DegenerateInput";
        case ErrorKind::ParseError: return "ParseError";
    }
    return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

SolverFailure::SolverFailure(const std::string& what, double last_residual,
                             std::optional<std::size_t> restart)
    : Error(ErrorKind::SolverFailure,
            what + " (last residual " + sci(last_residual) +
                (restart ? ", restart " + std::to_string(*restart) : std::string()) + ")"),
      last_residual_(last_residual),
      restart_(restart) {}

ParseError::ParseError(const std::string& what, std::size_t line)
    : Error(ErrorKind::ParseError, (line ? "line " + std::to_string(line) + ": " : std::string()) + what), line_(line) {}

}  // namespace symlab
