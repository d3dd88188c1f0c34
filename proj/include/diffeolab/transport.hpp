#pragma once

#include "diffeolab/diffeo.hpp"
#include "diffeolab/fields.hpp"

#include <cstdint>
#include <limits>
#include <memory>

namespace diffeolab {

struct TransportResult {
    SampledField field;
    /// max over moved nodes of |cubic - linear| at the image point.
    double interp_residual = 0.0;
    std::size_t clipped_nodes = 0;
};

/// Node images and inverse Jacobians of one diffeomorphism on one grid,
/// computed once and reused by every pullback through that map.
class TransportPlan {
public:
    TransportPlan(const Diffeo& phi, const ChartDomain& chart, bool with_jacobians = true);

    const Diffeo& diffeo() const { return phi_; }
    const ChartDomain& chart() const { return chart_; }
    bool has_jacobians() const { return with_jacobians_; }
    /// Nodes the map actually moves (the rest are fixed exactly).
    const std::vector<std::size_t>& moved() const { return moved_; }
    const std::vector<Vec>& images() const { return images_; }
    const std::vector<Mat>& inverse_jacobians() const { return inverse_jacobians_; }
    std::size_t clipped_nodes() const { return clipped_; }
    /// Largest |d phi^-1| (spectral norm) over the grid nodes; 1 for fixed nodes.
    double sup_inverse_jacobian_norm() const { return sup_inverse_norm_; }

private:
    Diffeo phi_;
    ChartDomain chart_;
    bool with_jacobians_;
    std::vector<std::size_t> moved_;
    std::vector<Vec> images_;
    std::vector<Mat> inverse_jacobians_;
    std::size_t clipped_ = 0;
    double sup_inverse_norm_ = 1.0;
};

/// (L_phi f)(u) = f(phi(u)).
TransportResult pullback_scalar(const Diffeo& phi, const SampledField& f);
/// (L_phi f)(u) = d phi(u)^-1 f(phi(u)).
TransportResult pullback_vector(const Diffeo& phi, const SampledField& f);
/// Dispatches on the field kind; complex fields transport like scalars.
TransportResult pullback(const Diffeo& phi, const SampledField& f);
TransportResult pullback(const TransportPlan& plan, const SampledField& f);

/// The vector action at one point, without building a whole field.
Vec pullback_vector_at(const Diffeo& phi, const SampledField& f, const Vec& u);

/// |L_{psi o phi} f - L_phi L_psi f|_p / |f|_p.
double check_contravariance(const Diffeo& psi, const Diffeo& phi, const SampledField& f, double p);

struct NormEstimate {
    double estimate = 0.0;
    /// sqrt(s^(2(d+1)) + 1) with s = sup |d phi^-1|; NaN unless p = 2 and vector.
    double analytic_bound = std::numeric_limits<double>::quiet_NaN();
    double sup_inverse_jacobian = 1.0;
    int trials = 0;
};

inline constexpr std::uint64_t kDefaultSeed = 20240611;

/// Largest |L_phi f|_p / |f|_p over seeded random bumps, half of them centred
/// inside the support of phi.
NormEstimate operator_norm_estimate(const Diffeo& phi, int trials, double p, FieldKind kind,
                                    std::uint64_t seed = kDefaultSeed);

}  // namespace diffeolab
