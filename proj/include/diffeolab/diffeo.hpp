#pragma once

#include "diffeolab/fields.hpp"
#include "diffeolab/geometry.hpp"

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace diffeolab {

/// Parameter record a diffeomorphism was built from. Composite maps keep their
/// factors in `children` (application order); inverted maps keep one child.
struct DiffeoRecord {
    std::string constructor;
    std::vector<std::pair<std::string, std::vector<double>>> params;
    std::vector<DiffeoRecord> children;

    const std::vector<double>* find(const std::string& key) const;
};

class DiffeoImpl {
public:
    DiffeoImpl(ChartDomain chart, std::optional<BallRegion> support, std::string label)
        : chart_(std::move(chart)), support_(std::move(support)), label_(std::move(label)) {}
    virtual ~DiffeoImpl() = default;

    // Only called for points inside the support; the wrapper handles the rest.
    virtual Vec forward(const Vec& u) const = 0;
    virtual Vec inverse(const Vec& u) const = 0;
    virtual Mat jacobian(const Vec& u) const = 0;
    virtual DiffeoRecord record() const = 0;
    virtual bool numeric_inverse() const { return false; }
    virtual bool is_identity() const { return false; }

    const ChartDomain& chart() const { return chart_; }
    const std::optional<BallRegion>& support() const { return support_; }
    const std::string& label() const { return label_; }

protected:
    ChartDomain chart_;
    std::optional<BallRegion> support_;
    std::string label_;
};

/// A diffeomorphism of a chart with its inverse and Jacobian.
///
/// Points outside the declared support ball are returned untouched, bit for
/// bit. A missing support means the map may move every point.
class Diffeo {
public:
    explicit Diffeo(std::shared_ptr<const DiffeoImpl> impl) : impl_(std::move(impl)) {}

    static Diffeo identity(const ChartDomain& chart);

    const ChartDomain& chart() const { return impl_->chart(); }
    const std::optional<BallRegion>& support() const { return impl_->support(); }
    const std::string& label() const { return impl_->label(); }
    DiffeoRecord record() const { return impl_->record(); }
    bool is_identity() const { return impl_->is_identity(); }
    bool numeric_inverse() const { return impl_->numeric_inverse(); }

    /// True when `u` is outside the support, so every action leaves it alone.
    bool fixes(const Vec& u) const;

    Vec forward(const Vec& u) const;
    Vec inverse(const Vec& u) const;
    Mat jacobian(const Vec& u) const;

    /// The same map with forward and inverse exchanged.
    Diffeo inverted() const;

    const DiffeoImpl& impl() const { return *impl_; }

private:
    std::shared_ptr<const DiffeoImpl> impl_;
};

/// phi_n(u) = c + f_n(|u - c| / scale) (u - c), with f_n = 1/n on the unit
/// ball and 1 outside radius 1 + eps (in units of `scale`).
Diffeo make_contraction(const ChartDomain& chart, int n, double eps, const Vec& center, double scale = 1.0);

/// Finite composition of bump-driven steps carrying x0 to x1 inside `ambient`.
/// steps = 0 picks the smallest count allowed by the step bound.
Diffeo make_point_transport(const ChartDomain& chart, const Vec& x0, const Vec& x1, const BallRegion& ambient,
                            int steps = 0);

/// Rotation by W inside `region`, blended radially to the identity over a
/// collar of width `blend`; the angle runs along the one-parameter subgroup
/// exp(t log W).
Diffeo make_rotation_conjugation(const ChartDomain& chart, const Mat& W, const BallRegion& region,
                                 double blend);

/// Rigid translation; only defined on a torus.
Diffeo make_translation(const ChartDomain& chart, const Vec& shift);

/// Moves the `axis` coordinate by amplitude * w(x) * chi(|x_perp|), where
/// w(x) = x * bump(x / half_width) and chi = bump(r / cross_radius).
Diffeo make_axis_stretch(const ChartDomain& chart, const Vec& center, int axis, double amplitude,
                         double half_width, double cross_radius);

/// compose(psi, phi).forward(u) = psi.forward(phi.forward(u)).
Diffeo compose(const Diffeo& psi, const Diffeo& phi);

/// 2x2 rotation by `angle`, or a 3x3 rotation about `axis`.
Mat rotation_matrix(double angle);
Mat rotation_matrix(const Vec& axis, double angle);

/// Local chart in which `f` becomes the constant field a * e1 near m, with
/// a = |f(m)| (signed in one dimension). Built by flowing the field with
/// fixed-step RK4 from the hyperplane through m orthogonal to f(m).
Diffeo flowbox_straighten(const SampledField& f, const Vec& m, double radius, int integrator_steps);

/// The constant a of the straightened field.
double flowbox_speed(const SampledField& f, const Vec& m);

/// f + 2 eps chi(|f|) e inside U, where chi = 1 for |f| <= eps and 0 for
/// |f| >= 2 eps. The unit axis e is chosen separately on each connected
/// near-zero node set so the addition cannot cancel the field.
SampledField perturb_away_from_zero(const SampledField& f, double eps, const BallRegion& region);

/// Central-difference Jacobian of `forward` with per-axis step h.
Mat finite_difference_jacobian(const Diffeo& phi, const Vec& u, const Vec& h);

}  // namespace diffeolab
