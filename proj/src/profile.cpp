#include "diffeolab/profile.hpp"

#include <algorithm>
#include <cmath>

namespace diffeolab {

namespace {

// exp(-1/x) underflows to zero long before 1/x overflows; cut it off early so
// the derivative never forms 0/0.
constexpr double kFlatCutoff = 1.0 / 700.0;

double psi(double x) { return x <= kFlatCutoff ? 0.0 : std::exp(-1.0 / x); }

double psi_derivative(double x) { return x <= kFlatCutoff ? 0.0 : std::exp(-1.0 / x) / (x * x); }

}  // namespace

double TransitionProfile::step(double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double a = psi(x);
    const double b = psi(1.0 - x);
    return a / (a + b);
}

double TransitionProfile::step_derivative(double x) {
    if (x <= 0.0 || x >= 1.0) return 0.0;
    const double a = psi(x);
    const double b = psi(1.0 - x);
    const double da = psi_derivative(x);
    const double db = -psi_derivative(1.0 - x);
    const double s = a + b;
    return (da * b - a * db) / (s * s);
}

double TransitionProfile::evaluate(double x) const { return from_ + (to_ - from_) * step(x); }

double TransitionProfile::derivative(double x) const { return (to_ - from_) * step_derivative(x); }

double bump_profile(double s) {
    const double q = 1.0 - s * s;
    if (q <= kFlatCutoff) return 0.0;
    return std::exp(1.0 - 1.0 / q);
}

double bump_profile_derivative(double s) {
    const double q = 1.0 - s * s;
    if (q <= kFlatCutoff) return 0.0;
    return std::exp(1.0 - 1.0 / q) * (-2.0 * s / (q * q));
}

double bump_profile_max_slope() {
    static const double value = [] {
        double m = 0.0;
        constexpr int n = 200000;
        for (int i = 0; i <= n; ++i) m = std::max(m, std::abs(bump_profile_derivative(double(i) / n)));
        // The sweep can only under-estimate the supremum; pad by a relative hair.
        return m * (1.0 + 1e-6);
    }();
    return value;
}

}  // namespace diffeolab
