#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace diffeolab {

// Charts are at most three dimensional; fixed upper bounds keep every point,
// vector and Jacobian allocation free.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;

enum class ErrorCode {
    InvalidChart,
    InvalidDensity,
    InvalidMetric,
    OutOfDomain,
    InvalidExponent,
    ChartMismatch,
    KindMismatch,
    Region,
    StepBudget,
    Construction,
    DegenerateField,
    MarginViolation,
    SingularJacobian,
    Precondition,
    UnderResolution,
    Budget,
    Config,
    Serialization,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Raised when an iterative construction runs out of its allowance; carries
/// the best value reached so callers can report it.
class BudgetExhausted : public Error {
public:
    BudgetExhausted(const std::string& what, double best)
        : Error(ErrorCode::Budget, what), best_(best) {}

    double best() const noexcept { return best_; }

private:
    double best_;
};

inline Vec make_vec(std::initializer_list<double> xs) {
    Vec v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

}  // namespace diffeolab
