#pragma once

// Reference computations written without the library, used as test oracles.

#include <cmath>
#include <functional>
#include <numbers>

namespace oracle {

/// Composite Simpson rule on [a, b] with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 20000) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

inline double bump(double s) { return std::abs(s) < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - s * s)) : 0.0; }

/// int_{R^2} |amp * bump(|x| / R)|^p dx, by the radial integral.
inline double bump_power_integral_2d(double R, double amp, double p) {
    return 2.0 * std::numbers::pi *
           simpson([&](double r) { return std::pow(std::abs(amp * bump(r / R)), p) * r; }, 0.0, R);
}

}  // namespace oracle
