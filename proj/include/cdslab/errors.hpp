#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cdslab {

// Error families map one-to-one onto CLI exit codes.
enum class ErrorKind { config = 1, numerical = 2, divergence = 3, io = 4 };

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

/// Argument outside the domain of a function (e.g. t outside [0, T]).
class DomainError : public NumericalError {
public:
    explicit DomainError(const std::string& what) : NumericalError("domain error: " + what) {}
};

class ShapeError : public NumericalError {
public:
    explicit ShapeError(const std::string& what) : NumericalError("shape error: " + what) {}
};

/// A requested label has no mixture components, or guidance was requested
/// without a label.
class ConditionError : public NumericalError {
public:
    explicit ConditionError(const std::string& what) : NumericalError("condition error: " + what) {}
};

/// Division by sigma_t at sigma_t = 0.
class SingularityError : public NumericalError {
public:
    explicit SingularityError(const std::string& what) : NumericalError("singularity error: " + what) {}
};

class OrderError : public NumericalError {
public:
    explicit OrderError(const std::string& what) : NumericalError("order error: " + what) {}
};

class StateError : public NumericalError {
public:
    explicit StateError(const std::string& what) : NumericalError("state error: " + what) {}
};

class InputError : public NumericalError {
public:
    explicit InputError(const std::string& what) : NumericalError("input error: " + what) {}
};

class DivergenceError : public Error {
public:
    explicit DivergenceError(const std::string& what) : Error(ErrorKind::divergence, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

} // namespace cdslab
