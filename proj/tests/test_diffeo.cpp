#include "diffeolab/bank.hpp"
#include "diffeolab/diffeo.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace diffeolab;

namespace {

std::vector<Vec> sample_points(const ChartDomain& c, int n, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Vec> pts;
    for (int i = 0; i < n; ++i) {
        Vec x(c.dim());
        for (int a = 0; a < c.dim(); ++a) x(a) = c.lower(a) + u(rng) * c.length(a);
        pts.push_back(x);
    }
    return pts;
}

}  // namespace

TEST_CASE("every bank map inverts its forward map") {
    const ChartDomain c = standard_chart(256);
    for (const auto& df : standard_diffeo_bank()) {
        CAPTURE(df.label);
        const Diffeo phi = df.make(c);
        double worst = 0.0;
        for (const Vec& x : sample_points(c, 400, 1)) {
            worst = std::max(worst, c.distance(phi.inverse(phi.forward(x)), x));
            worst = std::max(worst, c.distance(phi.forward(phi.inverse(x)), x));
        }
        CHECK(worst < 1e-10);
    }
}

TEST_CASE("bank Jacobians match central differences") {
    const ChartDomain c = standard_chart(256);
    const Vec h = Vec::Constant(2, 1e-6);
    for (const auto& df : standard_diffeo_bank()) {
        CAPTURE(df.label);
        const Diffeo phi = df.make(c);
        double worst = 0.0;
        for (const Vec& x : sample_points(c, 200, 2))
            worst = std::max(worst, (phi.jacobian(x) - finite_difference_jacobian(phi, x, h)).norm());
        CHECK(worst < 1e-6);
    }
}

TEST_CASE("points outside the support are returned bit for bit") {
    const ChartDomain c = standard_chart(64);
    const Diffeo phi = make_contraction(c, 3, 0.5, make_vec({0.5, 0.5}), 0.1);
    const Vec far = make_vec({0.9, 0.123456789});
    CHECK(phi.fixes(far));
    const Vec y = phi.forward(far);
    CHECK(y(0) == far(0));
    CHECK(y(1) == far(1));
}

TEST_CASE("contraction is the scaled map on the inner ball") {
    const ChartDomain c = standard_chart(64);
    const Vec ctr = make_vec({0.5, 0.5});
    const Diffeo phi = make_contraction(c, 4, 0.5, ctr, 0.2);
    const Vec u = make_vec({0.6, 0.45});
    const Vec want = ctr + (u - ctr) / 4.0;
    CHECK((phi.forward(u) - want).norm() < 1e-15);
    CHECK((phi.jacobian(u) - Mat::Identity(2, 2) / 4.0).norm() < 1e-15);
    // Outside radius scale * (1 + eps) the map is the identity.
    const Vec v = make_vec({0.5, 0.81});
    CHECK((phi.forward(v) - v).norm() == 0.0);
}

TEST_CASE("translation wraps around the torus") {
    const ChartDomain c = standard_chart(32);
    const Diffeo phi = make_translation(c, make_vec({0.3, -0.2}));
    CHECK(c.distance(phi.forward(make_vec({0.9, 0.1})), make_vec({0.2, 0.9})) < 1e-15);
    CHECK_THROWS_AS(make_translation(ChartDomain::box({0, 0}, {1, 1}, {8, 8}), make_vec({0.1, 0.1})), Error);
}

TEST_CASE("rotation conjugation applies W on the inner ball") {
    const ChartDomain c = standard_chart(64);
    const Vec ctr = make_vec({0.5, 0.5});
    const Mat W = rotation_matrix(std::numbers::pi / 3);
    const Diffeo phi = make_rotation_conjugation(c, W, BallRegion{ctr, 0.1}, 0.1);
    const Vec u = make_vec({0.55, 0.52});
    CHECK((phi.forward(u) - (ctr + W * (u - ctr))).norm() < 1e-15);
    const Vec far = make_vec({0.5, 0.75});
    CHECK((phi.forward(far) - far).norm() == 0.0);
}

TEST_CASE("rotation_matrix is orthogonal with the right angle") {
    const Mat R = rotation_matrix(0.7);
    CHECK((R.transpose() * R - Mat::Identity(2, 2)).norm() < 1e-15);
    CHECK(R(1, 0) == doctest::Approx(std::sin(0.7)));
    const Mat R3 = rotation_matrix(make_vec({0, 0, 1}), 0.7);
    CHECK((R3.topLeftCorner(2, 2) - R).norm() < 1e-15);
    CHECK(R3(2, 2) == doctest::Approx(1.0));
}

TEST_CASE("point transport carries x0 to x1 and stays inside the ambient ball") {
    const ChartDomain c = standard_chart(128);
    const BallRegion ambient{make_vec({0.5, 0.5}), 0.3};
    const Vec x0 = make_vec({0.4, 0.45}), x1 = make_vec({0.6, 0.55});
    const Diffeo phi = make_point_transport(c, x0, x1, ambient);
    CHECK(c.distance(phi.forward(x0), x1) < 1e-9);
    CHECK(phi.fixes(make_vec({0.5, 0.85})));
    CHECK_THROWS_AS(make_point_transport(c, x0, make_vec({0.9, 0.5}), ambient), Error);
}

TEST_CASE("compose applies phi first") {
    const ChartDomain c = standard_chart(32);
    const Diffeo a = make_translation(c, make_vec({0.1, 0.0}));
    const Diffeo b = make_contraction(c, 2, 0.5, make_vec({0.5, 0.5}), 0.2);
    const Diffeo ba = compose(b, a);
    const Vec u = make_vec({0.42, 0.5});
    CHECK(c.distance(ba.forward(u), b.forward(a.forward(u))) < 1e-15);
    CHECK(c.distance(ba.inverse(ba.forward(u)), u) < 1e-12);
    const Mat J = b.jacobian(a.forward(u)) * a.jacobian(u);
    CHECK((ba.jacobian(u) - J).norm() < 1e-14);
}

TEST_CASE("inverted swaps the directions") {
    const ChartDomain c = standard_chart(32);
    const Diffeo phi = make_contraction(c, 3, 1.0, make_vec({0.5, 0.5}), 0.15);
    const Diffeo inv = phi.inverted();
    const Vec u = make_vec({0.52, 0.47});
    CHECK(c.distance(inv.forward(u), phi.inverse(u)) == 0.0);
    CHECK((inv.jacobian(u) * phi.jacobian(inv.forward(u)) - Mat::Identity(2, 2)).norm() < 1e-9);
}

TEST_CASE("axis stretch moves only its axis") {
    const ChartDomain c = standard_chart(64);
    const Diffeo phi = make_axis_stretch(c, make_vec({0.5, 0.5}), 0, 0.3, 0.25, 0.25);
    const Vec u = make_vec({0.55, 0.48});
    const Vec y = phi.forward(u);
    CHECK(y(1) == u(1));
    CHECK(y(0) != u(0));
    CHECK_THROWS_AS(make_axis_stretch(c, make_vec({0.5, 0.5}), 0, 5.0, 0.25, 0.25), Error);
}

TEST_CASE("flowbox straightens a constant field to itself") {
    const ChartDomain c = standard_chart(64);
    const SampledField f = SampledField::vector(c, [](const Vec&) { return make_vec({0.0, 2.0}); });
    CHECK(flowbox_speed(f, make_vec({0.5, 0.5})) == doctest::Approx(2.0));
    const Diffeo phi = flowbox_straighten(f, make_vec({0.5, 0.5}), 0.1, 16);
    const Vec u = make_vec({0.53, 0.49});
    // d phi^-1 f(phi(u)) must be (2, 0).
    const Vec w = phi.jacobian(u).inverse() * f.eval(phi.forward(u));
    CHECK(w(0) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(std::abs(w(1)) < 1e-9);
}

TEST_CASE("flowbox refuses a vanishing field") {
    const ChartDomain c = standard_chart(32);
    const SampledField z = SampledField::zeros(c, FieldKind::Vector);
    CHECK_THROWS_AS(flowbox_straighten(z, make_vec({0.5, 0.5}), 0.1, 8), Error);
}

TEST_CASE("perturbation lifts a field away from zero without cancelling it") {
    const ChartDomain c = standard_chart(64);
    const SampledField f = make_vector_bump(c, make_vec({0.5, 0.5}), 0.2, make_vec({1.0, 0.0}));
    const BallRegion U{make_vec({0.5, 0.5}), 0.3};
    const double eps = 0.05;
    const SampledField g = perturb_away_from_zero(f, eps, U);
    double low = 1e300;
    for (std::size_t i = 0; i < c.node_count(); ++i)
        if (U.contains(c, c.node(i))) low = std::min(low, g.value_at(i).norm());
    CHECK(low >= eps * (1.0 - 1e-12));
}
