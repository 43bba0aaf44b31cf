#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <string_view>

namespace misfit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Parameter vector beta = (beta_0, ..., beta_d); beta_0 is the intercept.
using ParamVector = Eigen::VectorXd;

enum class Link { Logistic, Probit };

std::string_view to_string(Link link);
Link parse_link(std::string_view name);

// -------------------------------------------------------------------------
// Error hierarchy. Every failure the library reports derives from Error.
// -------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

/// Malformed input data: non-binary outcomes, non-finite values, empty input.
class DataError : public Error {
public:
    using Error::Error;
};

/// Raised by text readers; carries the offending 1-based line when known.
class ParseError : public DataError {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : DataError(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A symmetric matrix that is not positive definite or whose condition
/// number exceeds the configured limit.
class SingularMatrixError : public Error {
public:
    using Error::Error;
};

/// A fit that did not reach an interior maximiser.
class FitError : public Error {
public:
    using Error::Error;
};

class LocalMassError : public FitError {
public:
    using FitError::FitError;
};

class ImportanceSamplingError : public Error {
public:
    using Error::Error;
};

class OracleError : public Error {
public:
    using Error::Error;
};

/// Population maximiser escapes to infinity (e.g. truth identically one).
class OracleDivergenceError : public OracleError {
public:
    using OracleError::OracleError;
};

class BootstrapError : public Error {
public:
    using Error::Error;
};

class BudgetExceededError : public Error {
public:
    using Error::Error;
};

}  // namespace misfit
