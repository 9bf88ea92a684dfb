#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace symlab {

enum class ErrorKind {
    InvalidInput,
    NotPsd,
    TooLarge,
    SolverFailure,
    HypothesisViolated,
    DegenerateInput,
    ParseError,
};

const char* to_string(ErrorKind kind) noexcept;

/// Base for every error raised by the library. Callers that only care about
/// the category can switch on kind().
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what);
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class InvalidInput : public Error {
public:
    explicit InvalidInput(const std::string& what) : Error(ErrorKind::InvalidInput, what) {}
};

class NotPsd : public Error {
public:
    explicit NotPsd(const std::string& what) : Error(ErrorKind::NotPsd, what) {}
};

class TooLarge : public Error {
public:
    explicit TooLarge(const std::string& what) : Error(ErrorKind::TooLarge, what) {}
};

class DegenerateInput : public Error {
public:
    explicit DegenerateInput(const std::string& what) : Error(ErrorKind::DegenerateInput, what) {}
};

class HypothesisViolated : public Error {
public:
    explicit HypothesisViolated(const std::string& what)
        : Error(ErrorKind::HypothesisViolated, what) {}
};

/// Iterative solver gave up. Carries the last residual and, for multi-restart
/// solvers, the restart that failed.
class SolverFailure : public Error {
public:
    SolverFailure(const std::string& what, double last_residual,
                  std::optional<std::size_t> restart = std::nullopt);
    double last_residual() const noexcept { return last_residual_; }
    std::optional<std::size_t> restart() const noexcept { return restart_; }

private:
    double last_residual_;
    std::optional<std::size_t> restart_;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace symlab
