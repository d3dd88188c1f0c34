#include "diffeolab/bank.hpp"
#include "diffeolab/transport.hpp"

#include <doctest.h>

#include <cmath>

using namespace diffeolab;

TEST_CASE("pullback by a whole-cell translation is an index shift") {
    const ChartDomain c = standard_chart(64);
    const SampledField f = make_bump(c, make_vec({0.4, 0.55}), 0.2, 1.0);
    const int sx = 5, sy = 61;
    const Diffeo phi = make_translation(c, make_vec({sx * c.spacing(0), sy * c.spacing(1)}));
    const SampledField g = pullback(phi, f).field;
    for (std::size_t k = 0; k < c.node_count(); ++k) {
        const auto idx = c.multi_index(k);
        const std::size_t src = c.flat_index({(idx[0] + sx) % 64, (idx[1] + sy) % 64, 0});
        CHECK(g.scalar_at(k) == f.scalar_at(src));
    }
}

TEST_CASE("vector pullback scales by n inside a contraction") {
    const ChartDomain c = standard_chart(64);
    const SampledField e = SampledField::vector(c, [](const Vec&) { return make_vec({1.0, -2.0}); });
    const Vec ctr = make_vec({0.5, 0.5});
    const Diffeo phi = make_contraction(c, 3, 0.5, ctr, 0.2);
    const SampledField g = pullback(phi, e).field;
    for (std::size_t k = 0; k < c.node_count(); ++k) {
        const Vec x = c.node(k);
        if (c.distance(x, ctr) < 0.19) {
            CHECK((g.value_at(k) - make_vec({3.0, -6.0})).norm() < 1e-13);
        } else if (c.distance(x, ctr) > 0.31) {
            CHECK((g.value_at(k) - make_vec({1.0, -2.0})).norm() == 0.0);
        }
    }
}

TEST_CASE("fixed nodes are untouched and the plan records only moved nodes") {
    const ChartDomain c = standard_chart(64);
    const Diffeo phi = make_contraction(c, 2, 0.5, make_vec({0.5, 0.5}), 0.1);
    const TransportPlan plan(phi, c);
    for (std::size_t k : plan.moved()) CHECK(c.distance(c.node(k), make_vec({0.5, 0.5})) < 0.15 + 1e-12);
    CHECK(plan.sup_inverse_jacobian_norm() >= 2.0 - 1e-12);
}

TEST_CASE("pullback is contravariant up to interpolation error") {
    const ChartDomain c = standard_chart(256);
    const auto bank = standard_diffeo_bank();
    const SampledField f = standard_vector_fields()[0].make(c);
    const double defect = check_contravariance(bank[5].make(c), bank[7].make(c), f, 2.0);
    CHECK(defect < 5e-3);
    // Translations by whole cells compose exactly.
    const Diffeo t1 = make_translation(c, make_vec({3 * c.spacing(0), 0.0}));
    const Diffeo t2 = make_translation(c, make_vec({0.0, 5 * c.spacing(1)}));
    CHECK(check_contravariance(t1, t2, f, 2.0) == 0.0);
}

TEST_CASE("operator norm of a translation is one and the estimate respects the bound") {
    const ChartDomain c = standard_chart(128);
    const NormEstimate t = operator_norm_estimate(make_translation(c, make_vec({4 * c.spacing(0), 0.0})), 8, 2.0,
                                                  FieldKind::Vector);
    CHECK(t.estimate == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(t.analytic_bound == doctest::Approx(std::sqrt(2.0)));

    const Diffeo phi = make_contraction(c, 2, 1.0, make_vec({0.5, 0.5}), 0.15);
    const NormEstimate e = operator_norm_estimate(phi, 16, 2.0, FieldKind::Vector);
    // s = 2 on the inner ball, so the bound is sqrt(2^6 + 1).
    CHECK(e.sup_inverse_jacobian == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(e.analytic_bound == doctest::Approx(std::sqrt(65.0)).epsilon(1e-9));
    CHECK(e.estimate <= e.analytic_bound);
    CHECK(std::isnan(operator_norm_estimate(phi, 4, 1.0, FieldKind::Vector).analytic_bound));
}

TEST_CASE("the estimate is reproducible for a fixed seed") {
    const ChartDomain c = standard_chart(64);
    const Diffeo phi = standard_diffeo_bank()[3].make(c);
    CHECK(operator_norm_estimate(phi, 8, 2.0, FieldKind::Vector, 9).estimate ==
          operator_norm_estimate(phi, 8, 2.0, FieldKind::Vector, 9).estimate);
}
