#include "diffeolab/operators.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace diffeolab;

namespace {

SampledField signed_field(const ChartDomain& c) {
    return field_axpy(1.0, make_bump(c, make_vec({0.3, 0.4}), 0.15, 1.0), 1.0,
                      make_bump(c, make_vec({0.7, 0.6}), 0.15, -0.7));
}

}  // namespace

TEST_CASE("pointwise operators act node by node") {
    const ChartDomain c = ChartDomain::unit_torus(2, 32);
    const SampledField f = signed_field(c);
    for (const auto& name : {"relu", "tanh", "abs", "sigmoid", "softplus", "sin"}) {
        CAPTURE(name);
        const SampledField g = apply(OperatorSpec::pointwise(name), f);
        const auto& rho = scalar_function(name);
        for (std::size_t i = 0; i < c.node_count(); ++i) CHECK(g.scalar_at(i) == rho.fn(f.scalar_at(i)));
    }
    CHECK(scalar_function("tanh").fn(0.3) == std::tanh(0.3));
    CHECK(scalar_function("relu").fn(-1.0) == 0.0);
    CHECK_THROWS_AS(OperatorSpec::pointwise("nope"), Error);
}

TEST_CASE("registry Lipschitz constants hold on random pairs") {
    for (const auto& name : scalar_function_names()) {
        CAPTURE(name);
        const auto& rho = scalar_function(name);
        CHECK(sampled_lipschitz(rho, 4000) <= rho.lipschitz * (1.0 + 1e-12));
    }
}

TEST_CASE("blur of a Fourier mode multiplies it by the Gaussian symbol") {
    const ChartDomain c = ChartDomain::unit_torus(2, 128);
    const double k = 2.0 * std::numbers::pi * 3.0, sigma = 0.03;
    const SampledField f = SampledField::scalar(c, [&](const Vec& x) { return std::cos(k * x(0)); });
    const SampledField g = apply(OperatorSpec::blur(sigma), f);
    const double symbol = std::exp(-0.5 * k * k * sigma * sigma);
    for (std::size_t i = 0; i < c.node_count(); i += 97)
        CHECK(g.scalar_at(i) == doctest::Approx(symbol * f.scalar_at(i)).epsilon(2e-3).scale(1.0));
}

TEST_CASE("blur and local average preserve constants") {
    const ChartDomain c = ChartDomain::unit_torus(2, 32);
    const SampledField one = SampledField::scalar(c, [](const Vec&) { return 1.5; });
    for (const auto& M : {OperatorSpec::blur(0.05), OperatorSpec::local_average(0.1)}) {
        const SampledField g = apply(M, one);
        for (std::size_t i = 0; i < c.node_count(); ++i) CHECK(g.scalar_at(i) == doctest::Approx(1.5).epsilon(1e-14));
    }
}

TEST_CASE("sup is the constant largest magnitude") {
    const ChartDomain c = ChartDomain::unit_torus(2, 32);
    const SampledField f = signed_field(c);
    double m = 0.0;
    for (std::size_t i = 0; i < c.node_count(); ++i) m = std::max(m, std::abs(f.scalar_at(i)));
    const SampledField g = apply(OperatorSpec::sup(), f);
    CHECK(is_constant_field(g));
    CHECK(g.scalar_at(0) == m);
}

TEST_CASE("phase operator yields cos and sin") {
    const ChartDomain c = ChartDomain::unit_torus(1, 16);
    const SampledField f = SampledField::scalar(c, [](const Vec& x) { return 3.0 * x(0); });
    const SampledField g = apply(OperatorSpec::exp_phase(), f);
    CHECK(g.kind() == FieldKind::Complex);
    for (std::size_t i = 0; i < c.node_count(); ++i) {
        CHECK(g.value_at(i)(0) == std::cos(f.scalar_at(i)));
        CHECK(g.value_at(i)(1) == std::sin(f.scalar_at(i)));
    }
    const SampledField z = m_zero_image(OperatorSpec::exp_phase(), c, FieldKind::Scalar);
    CHECK(is_constant_field(z));
    CHECK(z.value_at(3)(0) == 1.0);
}

TEST_CASE("sqrt counts negative inputs") {
    const ChartDomain c = ChartDomain::unit_torus(1, 8);
    std::vector<double> v{4, -1, 0, 9, -2, 1, 0.25, -0.5};
    ApplyDiagnostics diag;
    const SampledField g = apply(OperatorSpec::sqrt_pointwise(), SampledField(c, FieldKind::Scalar, v), &diag);
    CHECK(diag.negative_inputs == 3);
    CHECK(g.scalar_at(0) == 2.0);
    CHECK(g.scalar_at(1) == 0.0);
    CHECK(g.scalar_at(6) == 0.5);
}

TEST_CASE("vector operators") {
    const ChartDomain c = ChartDomain::unit_torus(2, 16);
    const SampledField f = make_vector_bump(c, make_vec({0.5, 0.5}), 0.3, make_vec({3.0, 4.0}));
    const SampledField g = apply(OperatorSpec::scalar_multiple(-1.5), f);
    for (std::size_t i = 0; i < c.node_count(); ++i) CHECK((g.value_at(i) + 1.5 * f.value_at(i)).norm() == 0.0);
    const SampledField h = apply(OperatorSpec::vector_gain("tanh"), f);
    for (std::size_t i = 0; i < c.node_count(); ++i) {
        const Vec x = f.value_at(i);
        const double r = x.norm();
        const Vec want = r > 0 ? Vec(std::tanh(r) * x / r) : Vec(Vec::Zero(2));
        CHECK((h.value_at(i) - want).norm() < 1e-15);
    }
}

TEST_CASE("operators refuse field kinds they do not act on") {
    const ChartDomain c = ChartDomain::unit_torus(2, 8);
    const SampledField v = SampledField::zeros(c, FieldKind::Vector);
    const SampledField s = SampledField::zeros(c, FieldKind::Scalar);
    CHECK_THROWS_AS(apply(OperatorSpec::pointwise("tanh"), v), Error);
    CHECK_THROWS_AS(apply(OperatorSpec::scalar_multiple(2.0), s), Error);
    CHECK(OperatorSpec::blur(0.1).accepts(FieldKind::Vector));
    CHECK(OperatorSpec::blur(0.1).accepts(FieldKind::Scalar));
    CHECK_FALSE(OperatorSpec::sup().accepts(FieldKind::Vector));
}

TEST_CASE("Lipschitz probes: pointwise bounded, sqrt blows up near zero") {
    const ChartDomain c = ChartDomain::unit_torus(2, 64);
    CHECK(lipschitz_estimate(OperatorSpec::pointwise("tanh"), 2.0, 16, c) <= 1.0 + 1e-12);
    CHECK(lipschitz_estimate(OperatorSpec::sqrt_pointwise(), 2.0, 16, c, {1e-4, true}) > 10.0);
}
