#pragma once

#include <stdexcept>
#include <string>

namespace parcelforge {

/// Error categories; the CLI maps each one to a process exit code.
enum class ErrorKind {
    usage = 2,      // bad parameters or missing inputs
    data = 3,       // malformed files, shape mismatches, degenerate inputs
    numerical = 4,  // non-convergence, rank deficiency
    internal = 5
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct ParameterError : Error {
    explicit ParameterError(const std::string& w) : Error(ErrorKind::usage, w) {}
};

struct FormatError : Error {
    explicit FormatError(const std::string& w) : Error(ErrorKind::data, w) {}
};

struct ShapeError : Error {
    explicit ShapeError(const std::string& w) : Error(ErrorKind::data, w) {}
};

struct DegenerateError : Error {
    explicit DegenerateError(const std::string& w) : Error(ErrorKind::data, w) {}
};

struct DomainError : Error {
    explicit DomainError(const std::string& w) : Error(ErrorKind::data, w) {}
};

struct ConvergenceError : Error {
    ConvergenceError(const std::string& w, int iterations)
        : Error(ErrorKind::numerical, w), iterations(iterations) {}
    int iterations;
};

struct RankError : Error {
    explicit RankError(const std::string& w) : Error(ErrorKind::numerical, w) {}
};

}  // namespace parcelforge
