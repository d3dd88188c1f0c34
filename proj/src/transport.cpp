#include "diffeolab/transport.hpp"

#include "diffeolab/parallel.hpp"
#include "diffeolab/profile.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace diffeolab {

namespace {

constexpr double kSingularDet = 1e-12;

double inverse_norm(const Mat& J) {
    Eigen::JacobiSVD<Mat> svd(J);
    const double smin = svd.singularValues().minCoeff();
    return smin > 0.0 ? 1.0 / smin : std::numeric_limits<double>::infinity();
}

}  // namespace

TransportPlan::TransportPlan(const Diffeo& phi, const ChartDomain& chart, bool with_jacobians)
    : phi_(phi), chart_(chart), with_jacobians_(with_jacobians) {
    if (phi.chart() != chart) throw Error(ErrorCode::ChartMismatch, "diffeomorphism and field charts differ");
    if (phi.is_identity()) return;
    const std::size_t n = chart.node_count();
    const int d = chart.dim();
    std::vector<char> moved(n, 0);
    std::vector<Vec> images(n);
    std::vector<Mat> jinv(with_jacobians ? n : 0);
    std::vector<double> norms(with_jacobians ? n : 0, 1.0);
    std::vector<char> clipped(n, 0);

    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const Vec u = chart.node(i);
            if (phi.fixes(u)) continue;
            const Vec y = phi.forward(u);
            bool same = (y.array() == u.array()).all();
            if (with_jacobians) {
                const Mat J = phi.jacobian(u);
                const double det = J.determinant();
                if (!(std::abs(det) > kSingularDet)) {
                    std::ostringstream os;
                    os << "det d phi = " << det << " at node " << i;
                    throw Error(ErrorCode::SingularJacobian, os.str());
                }
                if (!J.isIdentity(0.0)) {
                    same = false;
                    jinv[i] = J.inverse();
                    norms[i] = inverse_norm(J);
                }
            }
            if (same) continue;
            if (!chart.periodic() && !chart.contains(y)) clipped[i] = 1;
            moved[i] = 1;
            images[i] = y;
            if (with_jacobians && jinv[i].size() == 0) jinv[i] = Mat::Identity(d, d);
        }
    });

    for (std::size_t i = 0; i < n; ++i) {
        if (with_jacobians) sup_inverse_norm_ = std::max(sup_inverse_norm_, norms[i]);
        if (clipped[i]) ++clipped_;
        if (!moved[i]) continue;
        moved_.push_back(i);
        images_.push_back(std::move(images[i]));
        if (with_jacobians) inverse_jacobians_.push_back(std::move(jinv[i]));
    }
}

TransportResult pullback(const TransportPlan& plan, const SampledField& f) {
    if (f.chart() != plan.chart()) throw Error(ErrorCode::ChartMismatch, "field and transport plan charts differ");
    const bool vector = f.kind() == FieldKind::Vector;
    if (vector && !plan.has_jacobians())
        throw Error(ErrorCode::Precondition, "vector pullback needs a plan with Jacobians");
    if (plan.clipped_nodes() > 0) {
        std::ostringstream os;
        os << plan.clipped_nodes() << " node images leave the box chart; the support must respect the margin";
        throw Error(ErrorCode::MarginViolation, os.str());
    }
    std::vector<double> out(f.values().begin(), f.values().end());
    const int nc = f.components();
    const auto& moved = plan.moved();
    const auto& images = plan.images();
    std::vector<double> residual(moved.size(), 0.0);
    parallel_for(moved.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            Vec v = f.eval(images[k]);
            Vec diff = v - f.eval(images[k], InterpOrder::Linear);
            if (vector) {
                v = plan.inverse_jacobians()[k] * v;
                diff = plan.inverse_jacobians()[k] * diff;
            }
            residual[k] = diff.norm();
            for (int c = 0; c < nc; ++c) out[moved[k] * nc + c] = v(c);
        }
    });
    TransportResult result{SampledField(f.chart(), f.kind(), std::move(out), f.interp_order()), 0.0, 0};
    for (double r : residual) result.interp_residual = std::max(result.interp_residual, r);
    return result;
}

TransportResult pullback_scalar(const Diffeo& phi, const SampledField& f) {
    if (f.kind() != FieldKind::Scalar) throw Error(ErrorCode::KindMismatch, "scalar pullback of a non-scalar field");
    return pullback(TransportPlan(phi, f.chart(), false), f);
}

TransportResult pullback_vector(const Diffeo& phi, const SampledField& f) {
    if (f.kind() != FieldKind::Vector) throw Error(ErrorCode::KindMismatch, "vector pullback of a non-vector field");
    return pullback(TransportPlan(phi, f.chart(), true), f);
}

TransportResult pullback(const Diffeo& phi, const SampledField& f) {
    return pullback(TransportPlan(phi, f.chart(), f.kind() == FieldKind::Vector), f);
}

Vec pullback_vector_at(const Diffeo& phi, const SampledField& f, const Vec& u) {
    const Mat J = phi.jacobian(u);
    if (!(std::abs(J.determinant()) > kSingularDet))
        throw Error(ErrorCode::SingularJacobian, "singular Jacobian at the evaluation point");
    return J.partialPivLu().solve(f.eval(phi.forward(u)));
}

double check_contravariance(const Diffeo& psi, const Diffeo& phi, const SampledField& f, double p) {
    const SampledField direct = pullback(compose(psi, phi), f).field;
    const SampledField chained = pullback(phi, pullback(psi, f).field).field;
    return lp_distance(direct, chained, p) / std::max(lp_norm(f, p), 1e-300);
}

NormEstimate operator_norm_estimate(const Diffeo& phi, int trials, double p, FieldKind kind, std::uint64_t seed) {
    if (trials < 1) throw Error(ErrorCode::Precondition, "trials must be >= 1");
    if (kind == FieldKind::Complex) throw Error(ErrorCode::KindMismatch, "norm estimates cover scalar and vector fields");
    const ChartDomain& chart = phi.chart();
    const int d = chart.dim();
    const TransportPlan plan(phi, chart, true);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Extent of the region where bumps are admissible.
    auto random_point = [&]() {
        Vec c(d);
        for (int a = 0; a < d; ++a) {
            const double lo = chart.lower(a) + (chart.periodic() ? 0.0 : chart.boundary_margin());
            const double hi = chart.upper(a) - (chart.periodic() ? 0.0 : chart.boundary_margin());
            c(a) = lo + (hi - lo) * unit(rng);
        }
        return c;
    };
    double min_len = std::numeric_limits<double>::infinity();
    for (int a = 0; a < d; ++a) min_len = std::min(min_len, chart.length(a));
    const double rmin = 4.0 * chart.max_spacing();
    const double rmax = std::max(rmin * 1.5, 0.2 * min_len);

    NormEstimate out;
    out.trials = trials;
    out.sup_inverse_jacobian = plan.sup_inverse_jacobian_norm();
    for (int t = 0; t < trials; ++t) {
        SampledField f = SampledField::zeros(chart, kind);
        for (int attempt = 0; attempt < 100; ++attempt) {
            BallRegion ball;
            ball.radius = rmin + (rmax - rmin) * unit(rng);
            if (t % 2 == 0 && phi.support()) {
                // Centre inside the support so the map actually acts on the bump.
                Vec dir(d);
                for (int a = 0; a < d; ++a) dir(a) = gauss(rng);
                dir.normalize();
                const double r = phi.support()->radius * std::pow(unit(rng), 1.0 / d);
                ball.center = chart.wrap(phi.support()->center + r * dir);
            } else {
                ball.center = random_point();
            }
            if (!region_fits(chart, ball)) continue;
            const double amp = 0.5 + unit(rng);
            if (kind == FieldKind::Scalar) {
                f = make_bump(chart, ball.center, ball.radius, unit(rng) < 0.5 ? -amp : amp);
            } else {
                Vec dir(d);
                for (int a = 0; a < d; ++a) dir(a) = gauss(rng);
                f = make_vector_bump(chart, ball.center, ball.radius, amp * dir.normalized());
            }
            break;
        }
        const double base = lp_norm(f, p);
        if (base == 0.0) continue;
        out.estimate = std::max(out.estimate, lp_norm(pullback(plan, f).field, p) / base);
    }
    if (p == 2.0 && kind == FieldKind::Vector)
        out.analytic_bound = std::sqrt(std::pow(out.sup_inverse_jacobian, 2.0 * (d + 1)) + 1.0);
    return out;
}

}  // namespace diffeolab
