#pragma once

#include <stdexcept>
#include <string>

namespace coteach {

// Validation-class failures (CLI exit code 1).
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class IngestionError : public ParameterError {
public:
    IngestionError(const std::string& msg, std::size_t row)
        : ParameterError(msg), row_(row) {}
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

class DomainError : public ParameterError {
public:
    using ParameterError::ParameterError;
};

class UndefinedMetricError : public ParameterError {
public:
    using ParameterError::ParameterError;
};

// Brute-force search refused because the subset count is over the limit.
class RefusalError : public ParameterError {
public:
    using ParameterError::ParameterError;
};

// Numeric-class failures (CLI exit code 2).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConvergenceError : public NumericError {
public:
    ConvergenceError(const std::string& msg, double grad_norm)
        : NumericError(msg), grad_norm_(grad_norm) {}
    double grad_norm() const noexcept { return grad_norm_; }

private:
    double grad_norm_;
};

}  // namespace coteach
