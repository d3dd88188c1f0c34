#pragma once

#include "diffeolab/diffeo.hpp"
#include "diffeolab/fields.hpp"
#include "diffeolab/operators.hpp"
#include "diffeolab/transport.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace diffeolab {

inline constexpr double kNormFloor = 1e-300;

/// One commutation measurement |M L_phi f - L_phi M f|_p.
struct DefectReport {
    std::string operator_label;
    std::string diffeo_label;
    std::string field_label;
    double p = 2.0;
    double defect_abs = 0.0;
    /// defect_abs / max(|L_phi M f|_p, 1e-300).
    double defect_rel = 0.0;
    std::vector<int> grid;
    /// |L_phi M f computed with cubic - with linear interpolation|_p, relative
    /// to the same denominator as defect_rel. The discretization noise floor.
    double interp_residual = 0.0;
};

DefectReport equivariance_defect(const OperatorSpec& M, const Diffeo& phi, const SampledField& f, double p,
                                 const std::string& field_label = "field");
DefectReport equivariance_defect(const OperatorSpec& M, const TransportPlan& plan, const SampledField& f, double p,
                                 const std::string& field_label = "field");

/// Chart-independent recipes, so the same map or field can be rebuilt at every
/// refinement level.
struct DiffeoFactory {
    std::string label;
    std::function<Diffeo(const ChartDomain&)> make;
};

struct FieldFactory {
    std::string label;
    FieldKind kind = FieldKind::Scalar;
    std::function<SampledField(const ChartDomain&)> make;
};

struct SuiteSettings {
    /// Charts for consecutive refinement levels, coarse to fine.
    std::vector<ChartDomain> levels;
    double p = 2.0;
    /// Maximum number of (diffeo, field) combinations examined.
    int budget = 1000;
    /// Defect must exceed this multiple of the interpolation baseline.
    double baseline_factor = 10.0;
    /// Absolute floor below which a defect counts as rounding noise.
    double noise_floor = 1e-12;
};

/// A single measurement counts against the operator when it clears both the
/// interpolation baseline and the noise floor.
bool exceeds_baseline(const DefectReport& r, const SuiteSettings& settings);

enum class Verdict { Consistent, Falsified };

const char* to_string(Verdict v);

struct SuiteResult {
    Verdict verdict = Verdict::Consistent;
    std::optional<DefectReport> witness;
    /// Every measurement, in (diffeo, field, level) order.
    std::vector<DefectReport> reports;
    /// Vector suites: least-squares lambda over all (M f, f) node pairs and the
    /// relative residual |M f - lambda f| / |M f|.
    double fitted_lambda = std::numeric_limits<double>::quiet_NaN();
    double fit_residual = std::numeric_limits<double>::quiet_NaN();
    /// Extra verdict from the mask-commutation probe (false when it fails).
    bool locality_ok = true;
};

SuiteResult falsification_suite_scalar(const OperatorSpec& M, const std::vector<DiffeoFactory>& diffeos,
                                       const std::vector<FieldFactory>& fields, const SuiteSettings& settings);
SuiteResult falsification_suite_vector(const OperatorSpec& M, const std::vector<DiffeoFactory>& diffeos,
                                       const std::vector<FieldFactory>& fields, const SuiteSettings& settings);

struct DecayCurve {
    std::vector<int> n_values;
    /// |L_{phi_n}(1_B f)|_p^p for each n.
    std::vector<double> norms;
    /// n^-(d+1) |1_B f|_p^p (vector) or n^-d |1_B f|_p^p (scalar).
    std::vector<double> bounds;
    double baseline = 0.0;
    /// Log-log slope of norms against n; NaN for a single n.
    double fitted_rate = std::numeric_limits<double>::quiet_NaN();
    int bound_exponent = 0;
};

/// Contracts the ball B(center, scale) to B(center, scale / n) with the
/// inverse of make_contraction and records the transported mass.
DecayCurve contraction_decay_test(const SampledField& f, const Vec& center, const std::vector<int>& n_values, double p,
                                  double scale = 1.0, double eps = 0.5);

double localization_check(const OperatorSpec& M, const SampledField& f, const BallRegion& U, double p);
double disjoint_union_check(const OperatorSpec& M, const SampledField& f, const std::vector<BallRegion>& regions,
                            double p);
double inclusion_exclusion_reconstruct(const OperatorSpec& M, const SampledField& f, const std::vector<BallRegion>& cover,
                                       double p);

struct VitaliPiece {
    BallRegion ball;
    double value = 0.0;
};

struct VitaliResult {
    std::vector<VitaliPiece> pieces;
    /// |sum c_i 1_{U_i} - 1_U f|_p on the grid.
    double achieved_error = 0.0;
    /// Mean-p tolerance on |f - c_i| inside each ball.
    double local_tolerance = 0.0;
};

/// Greedy packing of U by disjoint balls with c_i = f(center_i). Each step
/// places the ball that removes the most error; radii are capped so that the
/// mean |f - c_i|^p inside every ball stays below a tolerance. Throws
/// BudgetExhausted (carrying the best error) when max_balls is not enough.
VitaliResult vitali_approximate(const SampledField& f, const BallRegion& U, double eps, int max_balls, double p = 2.0);

/// Fraction of spectral energy above half the Nyquist frequency on any axis.
double high_frequency_energy(const SampledField& f);

struct RadialBin {
    double mean_radius = 0.0;
    double lambda = 0.0;
    int count = 0;
};

struct RotationFit {
    std::vector<RadialBin> bins;
    double max_violation = 0.0;
    /// max over nodes of |F(x) - (<F(x),x>/|x|^2) x|.
    double orthogonal_residual = 0.0;
};

/// Samples W uniformly from O(d) (or SO(d) when `proper_only`) and measures
/// |F(Wx) - W F(x)| over the nodes of `ball`; then bins <F(x),x>/|x|^2.
RotationFit rotation_invariance_fit(const SampledField& F, const BallRegion& ball, int w_samples, bool proper_only = false,
                                    int bins = 32, std::uint64_t seed = 5);

/// Haar-random orthogonal matrix via QR of a Gaussian matrix.
Mat random_orthogonal(int d, std::uint64_t seed, bool proper_only = false);

/// Deviation of M(c 1_U) from a constant inside U (one cell away from the
/// boundary), plus the change along `transports` point transports inside U.
double constant_image_check(const OperatorSpec& M, double c, const BallRegion& U, int transports,
                            const ChartDomain& chart, std::uint64_t seed = 3);

/// Straightening residual: L2 distance over the nodes of B(m, radius) between
/// d phi^-1 f(phi) and the constant a e1.
double flowbox_residual(const Diffeo& phi, const SampledField& f, const Vec& m, double radius);

/// Log2 ratios of consecutive errors (the observed order per halving of h).
std::vector<double> observed_orders(const std::vector<double>& errors);

}  // namespace diffeolab
