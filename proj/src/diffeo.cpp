#include "diffeolab/diffeo.hpp"

#include "diffeolab/profile.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <sstream>

namespace diffeolab {

const std::vector<double>* DiffeoRecord::find(const std::string& key) const {
    for (const auto& [k, v] : params)
        if (k == key) return &v;
    return nullptr;
}

namespace {

std::vector<double> to_std(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

std::string fmt(double x) {
    std::ostringstream os;
    os << x;
    return os.str();
}

std::string fmt(const Vec& v) {
    std::ostringstream os;
    os << '(';
    for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? "," : "") << v(i);
    os << ')';
    return os.str();
}

void require_dim(const ChartDomain& chart, const Vec& v, const char* what) {
    if (v.size() != chart.dim()) throw Error(ErrorCode::Precondition, std::string(what) + " has the wrong dimension");
}

class IdentityImpl final : public DiffeoImpl {
public:
    explicit IdentityImpl(const ChartDomain& chart) : DiffeoImpl(chart, std::nullopt, "identity") {}
    Vec forward(const Vec& u) const override { return u; }
    Vec inverse(const Vec& u) const override { return u; }
    Mat jacobian(const Vec& u) const override { return Mat::Identity(u.size(), u.size()); }
    DiffeoRecord record() const override { return {"identity", {}, {}}; }
    bool is_identity() const override { return true; }
};

class InvertedImpl final : public DiffeoImpl {
public:
    explicit InvertedImpl(Diffeo base)
        : DiffeoImpl(base.chart(), base.support(), "inverse(" + base.label() + ")"), base_(std::move(base)) {}
    Vec forward(const Vec& u) const override { return base_.inverse(u); }
    Vec inverse(const Vec& u) const override { return base_.forward(u); }
    Mat jacobian(const Vec& u) const override { return base_.jacobian(base_.inverse(u)).inverse(); }
    DiffeoRecord record() const override { return {"inverse", {}, {base_.record()}}; }
    bool numeric_inverse() const override { return base_.numeric_inverse(); }
    bool is_identity() const override { return base_.is_identity(); }

private:
    Diffeo base_;
};

}  // namespace

Diffeo Diffeo::identity(const ChartDomain& chart) { return Diffeo(std::make_shared<IdentityImpl>(chart)); }

bool Diffeo::fixes(const Vec& u) const {
    if (impl_->is_identity()) return true;
    const auto& s = impl_->support();
    return s && !s->contains(impl_->chart(), u);
}

Vec Diffeo::forward(const Vec& u) const { return fixes(u) ? u : impl_->forward(u); }

Vec Diffeo::inverse(const Vec& u) const { return fixes(u) ? u : impl_->inverse(u); }

Mat Diffeo::jacobian(const Vec& u) const {
    if (fixes(u)) return Mat::Identity(u.size(), u.size());
    return impl_->jacobian(u);
}

Diffeo Diffeo::inverted() const { return Diffeo(std::make_shared<InvertedImpl>(*this)); }

Mat finite_difference_jacobian(const Diffeo& phi, const Vec& u, const Vec& h) {
    const int d = static_cast<int>(u.size());
    const ChartDomain& chart = phi.chart();
    Mat J(d, d);
    for (int j = 0; j < d; ++j) {
        Vec up = u, um = u;
        up(j) += h(j);
        um(j) -= h(j);
        const Vec diff = chart.displacement(phi.forward(um), phi.forward(up));
        J.col(j) = diff / (2.0 * h(j));
    }
    return J;
}

// ---------------------------------------------------------------- contraction

namespace {

class ContractionImpl final : public DiffeoImpl {
public:
    ContractionImpl(const ChartDomain& chart, int n, double eps, Vec center, double scale)
        : DiffeoImpl(chart, BallRegion{center, scale * (1.0 + eps)},
                     "contraction(n=" + std::to_string(n) + ",eps=" + fmt(eps) + ",c=" + fmt(center) +
                         ",s=" + fmt(scale) + ")"),
          n_(n), eps_(eps), center_(std::move(center)), scale_(scale), inner_(1.0 / n) {}

    // Radial factor f_n(t) and its derivative in t = r / scale.
    double factor(double t) const { return inner_ + (1.0 - inner_) * TransitionProfile::step((t - 1.0) / eps_); }
    double factor_derivative(double t) const {
        return (1.0 - inner_) * TransitionProfile::step_derivative((t - 1.0) / eps_) / eps_;
    }

    Vec forward(const Vec& u) const override {
        const Vec delta = chart_.displacement(center_, u);
        const double t = delta.norm() / scale_;
        return u + (factor(t) * delta - delta);
    }

    Vec inverse(const Vec& y) const override {
        const Vec delta = chart_.displacement(center_, y);
        const double rho = delta.norm();
        if (rho == 0.0) return y;
        const double r = radial_preimage(rho);
        return y + (delta * (r / rho) - delta);
    }

    Mat jacobian(const Vec& u) const override {
        const int d = chart_.dim();
        const Vec delta = chart_.displacement(center_, u);
        const double r = delta.norm();
        const double t = r / scale_;
        Mat J = factor(t) * Mat::Identity(d, d);
        if (r > 0.0) J += (factor_derivative(t) / scale_) * (delta * delta.transpose()) / r;
        return J;
    }

    DiffeoRecord record() const override {
        return {"contraction",
                {{"n", {double(n_)}}, {"eps", {eps_}}, {"center", to_std(center_)}, {"scale", {scale_}}},
                {}};
    }

    bool is_identity() const override { return n_ == 1; }

private:
    // Solves r * f_n(r / scale) = rho; the left side is strictly increasing.
    double radial_preimage(double rho) const {
        const double outer = scale_ * (1.0 + eps_);
        if (rho * n_ <= scale_) return rho * n_;
        if (rho >= outer) return rho;
        double lo = scale_, hi = outer;
        double r = std::clamp(rho, lo, hi);
        double last_step = hi - lo;
        for (int it = 0; it < 200; ++it) {
            const double t = r / scale_;
            const double g = r * factor(t) - rho;
            if (g > 0.0) hi = r; else lo = r;
            const double dg = factor(t) + t * factor_derivative(t);
            double next = r - g / dg;
            // Newton can cycle across the inflection of the profile; fall back
            // to bisection whenever it leaves the bracket or stops halving.
            if (!(next > lo && next < hi) || 2.0 * std::abs(next - r) > last_step) next = 0.5 * (lo + hi);
            last_step = std::abs(next - r);
            if (std::abs(next - r) <= 1e-16 * outer) {
                r = next;
                break;
            }
            r = next;
        }
        return r;
    }

    int n_;
    double eps_;
    Vec center_;
    double scale_;
    double inner_;
};

}  // namespace

Diffeo make_contraction(const ChartDomain& chart, int n, double eps, const Vec& center, double scale) {
    require_dim(chart, center, "contraction center");
    if (n < 1) throw Error(ErrorCode::Precondition, "contraction factor n must be >= 1");
    if (!(eps > 0.0) || !(scale > 0.0)) throw Error(ErrorCode::Precondition, "eps and scale must be positive");
    validate_region(chart, BallRegion{center, scale * (1.0 + eps)});
    return Diffeo(std::make_shared<ContractionImpl>(chart, n, eps, center, scale));
}

// ---------------------------------------------------------- point transport

namespace {

class PointTransportImpl final : public DiffeoImpl {
public:
    PointTransportImpl(const ChartDomain& chart, Vec x0, Vec x1, BallRegion ambient, int steps, double eta)
        : DiffeoImpl(chart, ambient,
                     "transport(" + fmt(x0) + "->" + fmt(x1) + ",rho=" + fmt(ambient.radius) + ")"),
          x0_(std::move(x0)), x1_(std::move(x1)), eta_(eta) {
        step_ = chart.displacement(x0_, x1_) / steps;
        for (int k = 0; k < steps; ++k) anchors_.push_back(x0_ + double(k) * step_);
    }

    Vec forward(const Vec& u) const override {
        Vec x = u;
        for (const Vec& a : anchors_) x = apply_step(a, x);
        return x;
    }

    Vec inverse(const Vec& y) const override {
        Vec x = y;
        for (auto it = anchors_.rbegin(); it != anchors_.rend(); ++it) x = invert_step(*it, x);
        return x;
    }

    Mat jacobian(const Vec& u) const override {
        const int d = chart_.dim();
        Mat J = Mat::Identity(d, d);
        Vec x = u;
        for (const Vec& a : anchors_) {
            J = step_jacobian(a, x) * J;
            x = apply_step(a, x);
        }
        return J;
    }

    DiffeoRecord record() const override {
        return {"point_transport",
                {{"x0", to_std(x0_)},
                 {"x1", to_std(x1_)},
                 {"ambient_center", to_std(support_->center)},
                 {"ambient_radius", {support_->radius}},
                 {"steps", {double(anchors_.size())}}},
                {}};
    }

    bool is_identity() const override { return anchors_.empty() || step_.norm() == 0.0; }

private:
    double profile_arg(const Vec& a, const Vec& x, Vec& rel) const {
        rel = chart_.displacement(a, x);
        return rel.squaredNorm() / (eta_ * eta_);
    }

    Vec apply_step(const Vec& a, const Vec& x) const {
        Vec rel;
        const double s = profile_arg(a, x, rel);
        if (s >= 1.0) return x;
        return x + step_ * bump_profile(s);
    }

    Mat step_jacobian(const Vec& a, const Vec& x) const {
        const int d = chart_.dim();
        Vec rel;
        const double s = profile_arg(a, x, rel);
        Mat J = Mat::Identity(d, d);
        if (s < 1.0) J += step_ * (bump_profile_derivative(s) * 2.0 / (eta_ * eta_) * rel).transpose();
        return J;
    }

    // Each step is a contraction perturbation of the identity, so Newton from
    // the first fixed-point iterate converges in a handful of iterations.
    Vec invert_step(const Vec& a, const Vec& y) const {
        Vec x = y - step_ * bump_profile(std::min(1.0, chart_.displacement(a, y).squaredNorm() / (eta_ * eta_)));
        for (int it = 0; it < 60; ++it) {
            const Vec r = apply_step(a, x) - y;
            if (r.norm() <= 1e-16 * (1.0 + y.norm())) break;
            const Vec dx = step_jacobian(a, x).partialPivLu().solve(r);
            x -= dx;
            if (dx.norm() <= 1e-17 * (1.0 + x.norm())) break;
        }
        return x;
    }

    Vec x0_, x1_;
    double eta_;
    Vec step_;
    std::vector<Vec> anchors_;
};

}  // namespace

Diffeo make_point_transport(const ChartDomain& chart, const Vec& x0, const Vec& x1, const BallRegion& ambient,
                            int steps) {
    require_dim(chart, x0, "x0");
    require_dim(chart, x1, "x1");
    validate_region(chart, ambient);
    const double d0 = chart.distance(ambient.center, x0);
    const double d1 = chart.distance(ambient.center, x1);
    if (!(d0 < ambient.radius) || !(d1 < ambient.radius))
        throw Error(ErrorCode::Region, "transport endpoints must lie inside the ambient ball");
    // The anchors lie on the segment x0 -> x1, so the farther endpoint bounds
    // how large a bump fits around every anchor.
    const double eta = 0.999 * (ambient.radius - std::max(d0, d1));
    const double limit = eta / (4.0 * bump_profile_max_slope());
    const double length = chart.distance(x0, x1);
    if (steps < 0) throw Error(ErrorCode::Precondition, "negative step count");
    if (steps == 0) steps = length == 0.0 ? 1 : static_cast<int>(std::floor(length / limit)) + 1;
    if (length / steps >= limit) {
        std::ostringstream os;
        os << "step length " << length / steps << " exceeds the contraction bound " << limit << " with " << steps
           << " steps";
        throw Error(ErrorCode::StepBudget, os.str());
    }
    return Diffeo(std::make_shared<PointTransportImpl>(chart, x0, x1, ambient, steps, eta));
}

// ---------------------------------------------------- rotation conjugation

Mat rotation_matrix(double angle) {
    Mat R(2, 2);
    const double c = std::cos(angle), s = std::sin(angle);
    R << c, -s, s, c;
    return R;
}

Mat rotation_matrix(const Vec& axis, double angle) {
    const Eigen::Vector3d a(axis(0), axis(1), axis(2));
    return Mat(Eigen::AngleAxisd(angle, a.normalized()).toRotationMatrix());
}

namespace {

class RotationImpl final : public DiffeoImpl {
public:
    RotationImpl(const ChartDomain& chart, Mat W, BallRegion region, double blend)
        : DiffeoImpl(chart, BallRegion{region.center, region.radius + blend},
                     "rotation(c=" + fmt(region.center) + ",r=" + fmt(region.radius) + ",blend=" + fmt(blend) + ")"),
          W_(std::move(W)), center_(region.center), inner_(region.radius), blend_(blend) {
        const int d = chart.dim();
        generator_ = Mat::Zero(d, d);
        if (d == 2) {
            angle_ = std::atan2(W_(1, 0), W_(0, 0));
            generator_ << 0.0, -angle_, angle_, 0.0;
        } else if (d == 3) {
            const Eigen::Matrix3d w3 = W_;
            const Eigen::AngleAxisd aa(w3);
            angle_ = aa.angle();
            axis_ = Vec(aa.axis());
            const Eigen::Vector3d k = aa.axis() * angle_;
            generator_ << 0.0, -k(2), k(1), k(2), 0.0, -k(0), -k(1), k(0), 0.0;
        }
    }

    double theta(double r) const { return 1.0 - TransitionProfile::step((r - inner_) / blend_); }
    double theta_derivative(double r) const { return -TransitionProfile::step_derivative((r - inner_) / blend_) / blend_; }

    Mat rotation(double r) const {
        if (r <= inner_) return W_;
        const double t = theta(r);
        if (chart_.dim() == 2) return rotation_matrix(t * angle_);
        if (chart_.dim() == 3) return rotation_matrix(axis_, t * angle_);
        return W_;
    }

    Vec forward(const Vec& u) const override {
        const Vec delta = chart_.displacement(center_, u);
        return u + (rotation(delta.norm()) * delta - delta);
    }

    // Rotations preserve |u - c|, so the inverse reads the angle off the image.
    Vec inverse(const Vec& y) const override {
        const Vec delta = chart_.displacement(center_, y);
        return y + (rotation(delta.norm()).transpose() * delta - delta);
    }

    Mat jacobian(const Vec& u) const override {
        const Vec delta = chart_.displacement(center_, u);
        const double r = delta.norm();
        const Mat R = rotation(r);
        if (r <= inner_) return R;
        return R + theta_derivative(r) * generator_ * R * delta * delta.transpose() / r;
    }

    DiffeoRecord record() const override {
        std::vector<double> w(W_.data(), W_.data() + W_.size());
        // Stored row-major.
        for (int i = 0; i < W_.rows(); ++i)
            for (int j = 0; j < W_.cols(); ++j) w[i * W_.cols() + j] = W_(i, j);
        return {"rotation_conjugation",
                {{"W", w}, {"center", to_std(center_)}, {"inner_radius", {inner_}}, {"blend", {blend_}}},
                {}};
    }

    bool is_identity() const override { return W_.isIdentity(0.0); }

private:
    Mat W_;
    Vec center_;
    double inner_;
    double blend_;
    double angle_ = 0.0;
    Vec axis_;
    Mat generator_;
};

}  // namespace

Diffeo make_rotation_conjugation(const ChartDomain& chart, const Mat& W, const BallRegion& region, double blend) {
    const int d = chart.dim();
    require_dim(chart, region.center, "rotation center");
    if (W.rows() != d || W.cols() != d) throw Error(ErrorCode::Construction, "W must be a d x d matrix");
    if ((W.transpose() * W - Mat::Identity(d, d)).cwiseAbs().maxCoeff() > 1e-12)
        throw Error(ErrorCode::Construction, "W is not orthogonal");
    if (W.determinant() < 0.0)
        throw Error(ErrorCode::Construction,
                    "W reverses orientation and is not exp of a generator; decompose it into rotations");
    if (!(blend > 0.0) || !(region.radius > 0.0))
        throw Error(ErrorCode::Precondition, "inner radius and blend width must be positive");
    validate_region(chart, BallRegion{region.center, region.radius + blend});
    return Diffeo(std::make_shared<RotationImpl>(chart, W, region, blend));
}

// --------------------------------------------------------------- translation

namespace {

class TranslationImpl final : public DiffeoImpl {
public:
    TranslationImpl(const ChartDomain& chart, Vec shift)
        : DiffeoImpl(chart, std::nullopt, "translation" + fmt(shift)), shift_(std::move(shift)) {}
    Vec forward(const Vec& u) const override { return u + shift_; }
    Vec inverse(const Vec& u) const override { return u - shift_; }
    Mat jacobian(const Vec& u) const override { return Mat::Identity(u.size(), u.size()); }
    DiffeoRecord record() const override { return {"translation", {{"shift", to_std(shift_)}}, {}}; }
    bool is_identity() const override { return shift_.isZero(0.0); }

private:
    Vec shift_;
};

}  // namespace

Diffeo make_translation(const ChartDomain& chart, const Vec& shift) {
    require_dim(chart, shift, "shift");
    if (!chart.periodic())
        throw Error(ErrorCode::Construction, "translations are only diffeomorphisms of a torus chart");
    return Diffeo(std::make_shared<TranslationImpl>(chart, shift));
}

// -------------------------------------------------------------- axis stretch

namespace {

// Range of d/dx [x bump(x)] over the real line.
std::pair<double, double> stretch_slope_range() {
    static const std::pair<double, double> range = [] {
        double lo = 1.0, hi = 1.0;
        constexpr int n = 200000;
        for (int i = -n; i <= n; ++i) {
            const double t = double(i) / n;
            const double g = bump_profile(t) + t * bump_profile_derivative(t);
            lo = std::min(lo, g);
            hi = std::max(hi, g);
        }
        return std::make_pair(lo, hi);
    }();
    return range;
}

class AxisStretchImpl final : public DiffeoImpl {
public:
    AxisStretchImpl(const ChartDomain& chart, Vec center, int axis, double amplitude, double half_width,
                    double cross_radius, double support_radius)
        : DiffeoImpl(chart, BallRegion{center, support_radius},
                     "stretch(axis=" + std::to_string(axis) + ",A=" + fmt(amplitude) + ",c=" + fmt(center) + ")"),
          center_(std::move(center)), axis_(axis), amp_(amplitude), a_(half_width), b_(cross_radius) {}

    double w(double x) const { return x * bump_profile(x / a_); }
    double dw(double x) const {
        const double t = x / a_;
        return bump_profile(t) + t * bump_profile_derivative(t);
    }
    double cross(const Vec& delta, Vec& perp, double& rho) const {
        perp = delta;
        perp(axis_) = 0.0;
        rho = perp.norm();
        return chart_.dim() == 1 ? 1.0 : bump_profile(rho / b_);
    }

    Vec forward(const Vec& u) const override {
        const Vec delta = chart_.displacement(center_, u);
        Vec perp;
        double rho;
        const double chi = cross(delta, perp, rho);
        Vec out = u;
        out(axis_) += amp_ * w(delta(axis_)) * chi;
        return out;
    }

    Vec inverse(const Vec& y) const override {
        const Vec delta = chart_.displacement(center_, y);
        Vec perp;
        double rho;
        const double chi = cross(delta, perp, rho);
        const double target = delta(axis_);
        if (chi == 0.0 || std::abs(target) >= a_) return y;
        // x + amp chi w(x) is increasing and fixes +-a, so the root is bracketed.
        double lo = -a_, hi = a_;
        double x = target;
        for (int it = 0; it < 200; ++it) {
            const double g = x + amp_ * chi * w(x) - target;
            if (g > 0.0) hi = x; else lo = x;
            const double dg = 1.0 + amp_ * chi * dw(x);
            double next = x - g / dg;
            if (!(next >= lo && next <= hi)) next = 0.5 * (lo + hi);
            if (std::abs(next - x) <= 4e-16 * a_) {
                x = next;
                break;
            }
            x = next;
        }
        Vec out = y;
        out(axis_) += x - target;
        return out;
    }

    Mat jacobian(const Vec& u) const override {
        const int d = chart_.dim();
        const Vec delta = chart_.displacement(center_, u);
        Vec perp;
        double rho;
        const double chi = cross(delta, perp, rho);
        const double x = delta(axis_);
        Mat J = Mat::Identity(d, d);
        J(axis_, axis_) += amp_ * chi * dw(x);
        if (d > 1 && rho > 0.0) {
            const double dchi = bump_profile_derivative(rho / b_) / b_;
            for (int j = 0; j < d; ++j)
                if (j != axis_) J(axis_, j) += amp_ * w(x) * dchi * perp(j) / rho;
        }
        return J;
    }

    DiffeoRecord record() const override {
        return {"axis_stretch",
                {{"center", to_std(center_)},
                 {"axis", {double(axis_)}},
                 {"amplitude", {amp_}},
                 {"half_width", {a_}},
                 {"cross_radius", {b_}}},
                {}};
    }

    bool is_identity() const override { return amp_ == 0.0; }

private:
    Vec center_;
    int axis_;
    double amp_, a_, b_;
};

}  // namespace

Diffeo make_axis_stretch(const ChartDomain& chart, const Vec& center, int axis, double amplitude,
                         double half_width, double cross_radius) {
    require_dim(chart, center, "stretch center");
    if (axis < 0 || axis >= chart.dim()) throw Error(ErrorCode::Precondition, "stretch axis out of range");
    if (!(half_width > 0.0) || (chart.dim() > 1 && !(cross_radius > 0.0)))
        throw Error(ErrorCode::Precondition, "stretch widths must be positive");
    const auto [lo, hi] = stretch_slope_range();
    if (!(1.0 + std::min(amplitude * lo, amplitude * hi) > 0.0))
        throw Error(ErrorCode::Construction, "stretch amplitude folds the axis; map would not be injective");
    const double radius =
        chart.dim() == 1 ? half_width : std::sqrt(half_width * half_width + cross_radius * cross_radius);
    validate_region(chart, BallRegion{center, radius});
    return Diffeo(std::make_shared<AxisStretchImpl>(chart, center, axis, amplitude, half_width, cross_radius, radius));
}

// ---------------------------------------------------------------- compose

namespace {

std::optional<BallRegion> union_ball(const ChartDomain& chart, const std::optional<BallRegion>& a,
                                     const std::optional<BallRegion>& b) {
    if (!a || !b) return std::nullopt;
    const Vec dir = chart.displacement(a->center, b->center);
    const double dist = dir.norm();
    if (dist + b->radius <= a->radius) return a;
    if (dist + a->radius <= b->radius) return b;
    const double radius = 0.5 * (dist + a->radius + b->radius);
    BallRegion out{chart.wrap(a->center + dir * ((radius - a->radius) / dist)), radius};
    if (chart.periodic() && !region_fits(chart, out)) return std::nullopt;
    return out;
}

class ComposeImpl final : public DiffeoImpl {
public:
    ComposeImpl(Diffeo psi, Diffeo phi)
        : DiffeoImpl(phi.chart(), union_ball(phi.chart(), psi.support(), phi.support()),
                     "compose(" + psi.label() + "," + phi.label() + ")"),
          psi_(std::move(psi)), phi_(std::move(phi)) {}

    Vec forward(const Vec& u) const override { return psi_.forward(phi_.forward(u)); }
    Vec inverse(const Vec& y) const override { return phi_.inverse(psi_.inverse(y)); }
    Mat jacobian(const Vec& u) const override { return psi_.jacobian(phi_.forward(u)) * phi_.jacobian(u); }
    DiffeoRecord record() const override { return {"compose", {}, {phi_.record(), psi_.record()}}; }
    bool numeric_inverse() const override { return psi_.numeric_inverse() || phi_.numeric_inverse(); }
    bool is_identity() const override { return psi_.is_identity() && phi_.is_identity(); }

private:
    Diffeo psi_, phi_;
};

}  // namespace

Diffeo compose(const Diffeo& psi, const Diffeo& phi) {
    if (psi.chart() != phi.chart()) throw Error(ErrorCode::ChartMismatch, "composed maps live on different charts");
    return Diffeo(std::make_shared<ComposeImpl>(psi, phi));
}

// ------------------------------------------------------------------ flowbox

namespace {

Mat transverse_frame(const Vec& e) {
    const int d = static_cast<int>(e.size());
    Mat Q(d, d);
    Q.col(0) = e;
    if (d == 1) return Q;
    if (d == 2) {
        Q(0, 1) = -e(1);
        Q(1, 1) = e(0);
        return Q;
    }
    // Gram-Schmidt against the coordinate axes least aligned with e.
    int col = 1;
    std::vector<int> order = {0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int i, int j) { return std::abs(e(i)) < std::abs(e(j)); });
    for (int k : order) {
        if (col == d) break;
        Vec v = Vec::Zero(d);
        v(k) = 1.0;
        for (int j = 0; j < col; ++j) v -= Q.col(j).dot(v) * Q.col(j);
        if (v.norm() < 1e-8) continue;
        Q.col(col++) = v.normalized();
    }
    if (Q.determinant() < 0.0) Q.col(d - 1) = -Q.col(d - 1);
    return Q;
}

class FlowboxImpl final : public DiffeoImpl {
public:
    FlowboxImpl(SampledField field, Vec m, double radius, int steps, double speed, Mat frame)
        : DiffeoImpl(field.chart(), std::nullopt,
                     "flowbox(m=" + fmt(m) + ",r=" + fmt(radius) + ",steps=" + std::to_string(steps) + ")"),
          field_(std::move(field)), m_(std::move(m)), radius_(radius), steps_(steps), speed_(speed),
          frame_(std::move(frame)) {
        h_ = Vec(chart_.dim());
        for (int a = 0; a < chart_.dim(); ++a) h_(a) = 0.5 * chart_.spacing(a);
    }

    Vec forward(const Vec& u) const override {
        const Vec w = chart_.displacement(m_, u);
        Vec x = u - w;  // m in the representative nearest u
        for (int j = 1; j < w.size(); ++j) x += w(j) * frame_.col(j);
        // On the hyperplane the first coordinate is flow time scaled by the speed.
        const double t = w(0) / speed_;
        const double dt = t / steps_;
        if (dt == 0.0) return x;
        for (int s = 0; s < steps_; ++s) {
            const Vec k1 = field_.eval(x);
            const Vec k2 = field_.eval(x + 0.5 * dt * k1);
            const Vec k3 = field_.eval(x + 0.5 * dt * k2);
            const Vec k4 = field_.eval(x + dt * k3);
            x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        return x;
    }

    Mat jacobian(const Vec& u) const override {
        const int d = chart_.dim();
        Mat J(d, d);
        for (int j = 0; j < d; ++j) {
            Vec up = u, um = u;
            up(j) += h_(j);
            um(j) -= h_(j);
            J.col(j) = chart_.displacement(forward(um), forward(up)) / (2.0 * h_(j));
        }
        return J;
    }

    Vec inverse(const Vec& y) const override {
        // Near m the map is m + Q (u - m); use that as the starting guess.
        Vec u = m_ + frame_.transpose() * chart_.displacement(m_, y);
        for (int it = 0; it < 50; ++it) {
            const Vec r = chart_.displacement(y, forward(u));
            if (r.norm() <= 1e-10) return u;
            u -= jacobian(u).partialPivLu().solve(r);
        }
        if (chart_.displacement(y, forward(u)).norm() <= 1e-10) return u;
        throw Error(ErrorCode::Construction, "flowbox inverse did not converge within 50 Newton steps");
    }

    DiffeoRecord record() const override {
        return {"flowbox", {{"m", to_std(m_)}, {"radius", {radius_}}, {"steps", {double(steps_)}}}, {}};
    }
    bool numeric_inverse() const override { return true; }

private:
    SampledField field_;
    Vec m_;
    double radius_;
    int steps_;
    double speed_;
    Mat frame_;
    Vec h_;
};

double field_norm_at(const SampledField& f, std::size_t node) { return f.value_at(node).norm(); }

}  // namespace

double flowbox_speed(const SampledField& f, const Vec& m) {
    const Vec fm = f.eval(m);
    return f.chart().dim() == 1 ? fm(0) : fm.norm();
}

Diffeo flowbox_straighten(const SampledField& f, const Vec& m, double radius, int integrator_steps) {
    if (f.kind() != FieldKind::Vector) throw Error(ErrorCode::KindMismatch, "flowbox needs a vector field");
    require_dim(f.chart(), m, "flowbox base point");
    if (integrator_steps < 1) throw Error(ErrorCode::Precondition, "integrator_steps must be >= 1");
    if (!(radius > 0.0)) throw Error(ErrorCode::Precondition, "flowbox radius must be positive");
    double scale = 0.0;
    for (std::size_t i = 0; i < f.node_count(); ++i) scale = std::max(scale, field_norm_at(f, i));
    const double floor = 1e-12 * std::max(scale, 1.0);
    const Vec fm = f.eval(m);
    if (fm.norm() <= floor) throw Error(ErrorCode::DegenerateField, "field vanishes at the base point");
    const BallRegion ball{m, radius};
    for (std::size_t i = 0; i < f.node_count(); ++i)
        if (ball.contains(f.chart(), f.chart().node(i)) && field_norm_at(f, i) <= floor)
            throw Error(ErrorCode::DegenerateField,
                        "field vanishes inside the flowbox ball; perturb it away from zero first");
    const double speed = flowbox_speed(f, m);
    const Vec e = f.chart().dim() == 1 ? make_vec({1.0}) : Vec(fm / fm.norm());
    return Diffeo(std::make_shared<FlowboxImpl>(f, m, radius, integrator_steps, speed, transverse_frame(e)));
}

// ----------------------------------------------------- zero perturbation

SampledField perturb_away_from_zero(const SampledField& f, double eps, const BallRegion& region) {
    if (f.kind() != FieldKind::Vector) throw Error(ErrorCode::KindMismatch, "perturbation needs a vector field");
    if (!(eps > 0.0)) throw Error(ErrorCode::Precondition, "eps must be positive");
    const ChartDomain& chart = f.chart();
    const int d = chart.dim();
    const std::size_t n = chart.node_count();
    const auto inside = ball_nodes(chart, region);

    std::vector<double> chi(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        if (inside[i]) chi[i] = 1.0 - TransitionProfile::step((field_norm_at(f, i) - eps) / eps);

    std::vector<double> out(f.values().begin(), f.values().end());
    std::vector<char> seen(n, 0);
    std::vector<std::size_t> component;
    for (std::size_t start = 0; start < n; ++start) {
        if (seen[start] || chi[start] <= 0.0) continue;
        component.clear();
        std::deque<std::size_t> queue{start};
        seen[start] = 1;
        while (!queue.empty()) {
            const std::size_t cur = queue.front();
            queue.pop_front();
            component.push_back(cur);
            const auto idx = chart.multi_index(cur);
            for (int a = 0; a < d; ++a) {
                for (int s : {-1, 1}) {
                    auto nb = idx;
                    nb[a] += s;
                    const int res = chart.resolution(a);
                    if (chart.periodic()) nb[a] = (nb[a] + res) % res;
                    else if (nb[a] < 0 || nb[a] >= res) continue;
                    const std::size_t j = chart.flat_index(nb);
                    if (!seen[j] && chi[j] > 0.0) {
                        seen[j] = 1;
                        queue.push_back(j);
                    }
                }
            }
        }
        // Pick the signed axis that keeps the smallest perturbed magnitude largest.
        int best_axis = 0;
        double best_sign = 1.0, best_score = -1.0;
        for (int a = 0; a < d; ++a) {
            for (double sign : {1.0, -1.0}) {
                double score = std::numeric_limits<double>::infinity();
                for (std::size_t i : component) {
                    Vec v = f.value_at(i);
                    v(a) += sign * 2.0 * eps * chi[i];
                    score = std::min(score, v.norm());
                }
                if (score > best_score) {
                    best_score = score;
                    best_axis = a;
                    best_sign = sign;
                }
            }
        }
        for (std::size_t i : component) out[i * d + best_axis] += best_sign * 2.0 * eps * chi[i];
    }
    return SampledField(chart, FieldKind::Vector, std::move(out), f.interp_order());
}

}  // namespace diffeolab
