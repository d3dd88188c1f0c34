#pragma once

namespace diffeolab {

/// C-infinity step built from exp(-1/x): equals `from` for x <= 0, `to` for
/// x >= 1 and is monotone in between.
class TransitionProfile {
public:
    TransitionProfile(double from = 0.0, double to = 1.0) : from_(from), to_(to) {}

    double operator()(double x) const { return evaluate(x); }
    double evaluate(double x) const;
    double derivative(double x) const;

    double from() const { return from_; }
    double to() const { return to_; }

    /// The normalized step S with S(0) = 0 and S(1) = 1.
    static double step(double x);
    static double step_derivative(double x);

private:
    double from_;
    double to_;
};

/// exp(1 - 1/(1 - s^2)) for |s| < 1, zero otherwise. Peak value 1 at s = 0.
double bump_profile(double s);
double bump_profile_derivative(double s);

/// sup over t of |d/dt bump_profile(t)|, computed once by a dense sweep.
double bump_profile_max_slope();

}  // namespace diffeolab
