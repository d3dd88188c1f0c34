#pragma once

#include "diffeolab/fields.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

namespace diffeolab {

/// A named real function for pointwise operators, with the Lipschitz constant
/// the registry vouches for.
struct ScalarFunction {
    std::string name;
    std::function<double(double)> fn;
    double lipschitz;
};

/// identity, relu, tanh, abs, sigmoid, softplus, sin.
const ScalarFunction& scalar_function(const std::string& name);
std::vector<std::string> scalar_function_names();

/// Largest |rho(x) - rho(y)| / |x - y| over seeded random pairs in [-range, range].
double sampled_lipschitz(const ScalarFunction& rho, int pairs, double range = 4.0,
                         std::uint64_t seed = 7);

namespace op {
struct PointwiseScalar { std::string rho; };
struct ScalarMultipleVector { double lambda = 1.0; };
/// rho(|f|) f / |f| with 0 -> 0.
struct PointwiseVectorGain { std::string rho; };
/// Separable Gaussian, truncated at 4 sigma and renormalized; per component.
struct GaussianBlur { double sigma = 0.05; };
/// Constant field equal to the largest node magnitude.
struct SupOperator {};
/// e^{i f} as a (re, im) field.
struct ExpPhase {};
/// sqrt(max(f, 0)); negative inputs are counted, not rejected.
struct SqrtPointwise {};
/// Mean over the nodes within `radius`, with zero extension outside a box.
struct LocalAverage { double radius = 0.1; };
}  // namespace op

using OperatorKind = std::variant<op::PointwiseScalar, op::ScalarMultipleVector, op::PointwiseVectorGain,
                                  op::GaussianBlur, op::SupOperator, op::ExpPhase, op::SqrtPointwise,
                                  op::LocalAverage>;

struct OperatorSpec {
    OperatorKind kind;
    std::string label;

    static OperatorSpec pointwise(const std::string& rho);
    static OperatorSpec scalar_multiple(double lambda);
    static OperatorSpec vector_gain(const std::string& rho);
    static OperatorSpec blur(double sigma);
    static OperatorSpec sup();
    static OperatorSpec exp_phase();
    static OperatorSpec sqrt_pointwise();
    static OperatorSpec local_average(double radius);

    /// Short kind name used in configs: "pointwise", "scalar_multiple", ...
    const char* kind_name() const;
    bool accepts(FieldKind kind) const;
    /// Whether the operator acts node by node.
    bool pointwise_kind() const;
};

struct ApplyDiagnostics {
    std::size_t negative_inputs = 0;
};

SampledField apply(const OperatorSpec& M, const SampledField& f, ApplyDiagnostics* diag = nullptr);

/// apply(M, 0) on the given chart.
SampledField m_zero_image(const OperatorSpec& M, const ChartDomain& chart, FieldKind kind);

/// True when every node of `f` carries the same value.
bool is_constant_field(const SampledField& f);

struct LipschitzProbe {
    /// Fixed |f - h| scale for every pair; 0 draws it log-uniformly in [1e-3, 1].
    double pair_distance = 0.0;
    /// Draw f itself at the pair-distance scale, so the pair sits next to 0.
    bool near_zero = false;
};

/// Largest |M f - M h|_p / |f - h|_p over seeded random bump-sum pairs.
double lipschitz_estimate(const OperatorSpec& M, double p, int trials, const ChartDomain& chart,
                          const LipschitzProbe& probe = {}, std::uint64_t seed = 11);

}  // namespace diffeolab
