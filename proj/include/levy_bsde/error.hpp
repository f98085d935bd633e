#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace levy_bsde {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid input: malformed model, dimension mismatch, bad parameter.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A user-supplied function returned a non-finite value.
class EvaluationError : public Error {
public:
    using Error::Error;
};

/// Least-squares system could not be solved even with ridge repair.
class RegressionError : public Error {
public:
    RegressionError(const std::string& what, double condition)
        : Error(what), condition_(condition) {}
    double condition() const noexcept { return condition_; }

private:
    double condition_;
};

/// Implicit solve in a backward step failed to converge.
class StepError : public Error {
public:
    StepError(const std::string& what, std::size_t path, std::size_t step, double residual)
        : Error(what), path_(path), step_(step), residual_(residual) {}
    std::size_t path() const noexcept { return path_; }
    std::size_t step() const noexcept { return step_; }
    double residual() const noexcept { return residual_; }

private:
    std::size_t path_;
    std::size_t step_;
    double residual_;
};

/// Quadrature or root finding failure.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Raised for d != 1 where only the scalar case is defined.
class UnsupportedDimensionError : public Error {
public:
    using Error::Error;
};

}  // namespace levy_bsde
