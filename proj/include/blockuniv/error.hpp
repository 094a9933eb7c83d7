#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace blockuniv {

/// Base class for everything thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A specification (design, fit or experiment config) that can never be valid.
class InvalidSpec : public Error {
public:
    using Error::Error;
};

/// An argument outside the domain of a mathematical function.
class DomainError : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// Malformed input files (CSV, key=value).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Numerical failure: factorization breakdown, quadrature disagreement, etc.
class NumericError : public Error {
public:
    using Error::Error;
};

/// An iterative solver ran out of iterations. Carries the last iterate.
class NonConvergence : public NumericError {
public:
    NonConvergence(const std::string& what, Eigen::VectorXd last_iterate, double last_change)
        : NumericError(what), last_iterate_(std::move(last_iterate)), last_change_(last_change) {}

    const Eigen::VectorXd& last_iterate() const noexcept { return last_iterate_; }
    double last_change() const noexcept { return last_change_; }

private:
    Eigen::VectorXd last_iterate_;
    double last_change_;
};

/// The fixed-point iteration left the region beta > 0.
class Divergence : public NumericError {
public:
    using NumericError::NumericError;
};

namespace detail {

inline void require_same_size(Eigen::Index a, Eigen::Index b, const char* what) {
    if (a != b) {
        throw DimensionMismatch(std::string(what) + ": " + std::to_string(a) +
                                " != " + std::to_string(b));
    }
}

}  // namespace detail
}  // namespace blockuniv
