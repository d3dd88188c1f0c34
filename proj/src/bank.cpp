#include "diffeolab/bank.hpp"

#include "diffeolab/io.hpp"
#include "diffeolab/profile.hpp"

#include <numbers>
#include <optional>

namespace diffeolab {

namespace {

constexpr double kPi = std::numbers::pi;

const Vec& mid() {
    static const Vec c = make_vec({0.5, 0.5});
    return c;
}

BallRegion transport_ambient() { return BallRegion{mid(), 0.4}; }

Diffeo contraction(const ChartDomain& chart, int n) { return make_contraction(chart, n, 1.0, mid(), 0.15); }

Diffeo transport_a(const ChartDomain& chart) {
    return make_point_transport(chart, make_vec({0.45, 0.47}), make_vec({0.56, 0.53}), transport_ambient());
}

Diffeo quarter_turn(const ChartDomain& chart) {
    return make_rotation_conjugation(chart, rotation_matrix(kPi / 2), BallRegion{mid(), 0.08}, 0.25);
}

Diffeo stretch_x(const ChartDomain& chart) { return make_axis_stretch(chart, mid(), 0, 0.35, 0.25, 0.25); }

Vec vec_or_empty(std::initializer_list<double> xs) { return xs.size() ? make_vec(xs) : Vec(); }

FieldTerm bump(std::initializer_list<double> c, double r, double amp, std::initializer_list<double> dir = {}) {
    return FieldTerm{"bump", make_vec(c), r, amp, vec_or_empty(dir)};
}

// The records are taken from maps built on a coarse chart; none of the
// constructors depend on the resolution.
DiffeoSpec spec(const std::string& label, const Diffeo& phi) { return {label, phi.record()}; }

}  // namespace

SampledField FieldSpec::make(const ChartDomain& chart) const {
    if (terms.empty()) return SampledField::zeros(chart, kind);
    std::optional<SampledField> acc;
    for (const auto& t : terms) {
        SampledField g = [&] {
            if (t.shape == "bump") {
                if (t.direction.size() == 0) return make_bump(chart, t.center, t.radius, t.amplitude);
                return make_vector_bump(chart, t.center, t.radius, t.amplitude * t.direction);
            }
            if (t.shape == "swirl") {
                if (chart.dim() != 2) throw Error(ErrorCode::Precondition, "swirl terms need a 2-D chart");
                return SampledField::vector(chart, [&](const Vec& u) -> Vec {
                    const Vec x = chart.displacement(t.center, u);
                    const double r = x.norm() / t.radius;
                    const double b = r < 1.0 ? bump_profile(r) : 0.0;
                    return t.amplitude * b * make_vec({-x(1), x(0)}) / t.radius;
                });
            }
            throw Error(ErrorCode::Construction, "unknown field term shape '" + t.shape + "'");
        }();
        if (g.kind() != kind) throw Error(ErrorCode::KindMismatch, label + ": term kind differs from the field kind");
        acc = acc ? field_axpy(1.0, *acc, 1.0, g) : std::move(g);
    }
    return *acc;
}

FieldFactory FieldSpec::factory() const {
    return {label, kind, [self = *this](const ChartDomain& c) { return self.make(c); }};
}

DiffeoFactory DiffeoSpec::factory() const {
    return {label, [rec = record](const ChartDomain& c) { return diffeo_from_record(rec, c); }};
}

ChartDomain standard_chart(int n) { return ChartDomain::unit_torus(2, n); }

std::vector<DiffeoSpec> standard_diffeo_specs() {
    const ChartDomain c = standard_chart(16);
    return {
        spec("contraction-n2", contraction(c, 2)),
        spec("contraction-n3", contraction(c, 3)),
        spec("expansion-n2", contraction(c, 2).inverted()),
        spec("transport-diagonal", transport_a(c)),
        spec("transport-vertical",
             make_point_transport(c, make_vec({0.5, 0.56}), make_vec({0.5, 0.44}), transport_ambient())),
        spec("rotation-quarter", quarter_turn(c)),
        spec("rotation-sixth", make_rotation_conjugation(c, rotation_matrix(-kPi / 3.0),
                                                         BallRegion{make_vec({0.45, 0.55}), 0.08}, 0.2)),
        spec("stretch-x", stretch_x(c)),
        spec("squeeze-y", make_axis_stretch(c, make_vec({0.55, 0.45}), 1, -0.4, 0.25, 0.25)),
        spec("translation", make_translation(c, make_vec({0.1, 0.05}))),
        spec("contraction-after-rotation", compose(contraction(c, 2), quarter_turn(c))),
        spec("transport-after-stretch", compose(transport_a(c), stretch_x(c))),
    };
}

std::vector<DiffeoFactory> standard_diffeo_bank() {
    std::vector<DiffeoFactory> out;
    for (const auto& s : standard_diffeo_specs()) out.push_back(s.factory());
    return out;
}

std::vector<FieldSpec> standard_scalar_field_specs() {
    return {
        {"bump", FieldKind::Scalar, {bump({0.5, 0.5}, 0.18, 1.0)}},
        {"signed-pair", FieldKind::Scalar, {bump({0.42, 0.5}, 0.1, 1.0), bump({0.62, 0.52}, 0.08, -0.8)}},
        {"triple",
         FieldKind::Scalar,
         {bump({0.35, 0.4}, 0.12, 1.2), bump({0.6, 0.62}, 0.1, -0.6), bump({0.58, 0.36}, 0.09, 0.9)}},
    };
}

std::vector<FieldSpec> standard_vector_field_specs() {
    return {
        {"vector-bump", FieldKind::Vector, {bump({0.5, 0.5}, 0.18, 1.0, {1.0, 0.5})}},
        {"swirl", FieldKind::Vector, {FieldTerm{"swirl", make_vec({0.52, 0.48}), 0.2, 1.0, Vec()}}},
        {"vector-pair",
         FieldKind::Vector,
         {bump({0.42, 0.5}, 0.1, 1.0, {0.0, 1.0}), bump({0.62, 0.52}, 0.08, 1.0, {-0.7, 0.3})}},
    };
}

std::vector<FieldFactory> standard_scalar_fields() {
    std::vector<FieldFactory> out;
    for (const auto& s : standard_scalar_field_specs()) out.push_back(s.factory());
    return out;
}

std::vector<FieldFactory> standard_vector_fields() {
    std::vector<FieldFactory> out;
    for (const auto& s : standard_vector_field_specs()) out.push_back(s.factory());
    return out;
}

}  // namespace diffeolab
