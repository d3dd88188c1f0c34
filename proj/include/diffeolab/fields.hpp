#pragma once

#include "diffeolab/geometry.hpp"

#include <functional>
#include <span>
#include <vector>

namespace diffeolab {

enum class FieldKind {
    Scalar,   // one real per node
    Vector,   // chart-coordinate components, one per axis
    Complex,  // (re, im) pairs; only produced by the phase operator
};

enum class InterpOrder { Linear, Cubic };

const char* to_string(FieldKind kind);
const char* to_string(InterpOrder order);

/// Samples of a scalar or vector field on every node of a chart.
///
/// Values are stored node-major (all components of node 0, then node 1, ...).
/// Construction enforces finiteness and, on box charts, that the zero collar
/// really is zero. Fields are immutable; every operation returns a new one.
class SampledField {
public:
    SampledField(ChartDomain chart, FieldKind kind, std::vector<double> values,
                 InterpOrder interp = InterpOrder::Cubic);

    static SampledField zeros(const ChartDomain& chart, FieldKind kind,
                              InterpOrder interp = InterpOrder::Cubic);
    static SampledField scalar(const ChartDomain& chart, const std::function<double(const Vec&)>& fn,
                               InterpOrder interp = InterpOrder::Cubic);
    static SampledField vector(const ChartDomain& chart, const std::function<Vec(const Vec&)>& fn,
                               InterpOrder interp = InterpOrder::Cubic);

    const ChartDomain& chart() const { return chart_; }
    FieldKind kind() const { return kind_; }
    InterpOrder interp_order() const { return interp_; }
    int components() const { return components_; }
    std::size_t node_count() const { return chart_.node_count(); }
    std::span<const double> values() const { return values_; }

    double scalar_at(std::size_t node) const { return values_[node * components_]; }
    Vec value_at(std::size_t node) const;

    SampledField with_interp(InterpOrder order) const;

    /// Interpolated value at an arbitrary point; exact at nodes. Throws
    /// OutOfDomain for points outside a box chart.
    Vec eval(const Vec& u) const { return eval(u, interp_); }
    Vec eval(const Vec& u, InterpOrder order) const;
    double eval_scalar(const Vec& u) const;

private:
    ChartDomain chart_;
    FieldKind kind_;
    InterpOrder interp_;
    int components_;
    std::vector<double> values_;
};

int component_count(FieldKind kind, int dim);
void require_same_chart(const SampledField& a, const SampledField& b);

Vec eval_field(const SampledField& f, const Vec& u);

double lp_norm_scalar(const SampledField& f, double p,
                      const VolumeDensity& omega = VolumeDensity::lebesgue());
double lp_norm_vector(const SampledField& f, double p, const MetricField& g = MetricField::euclidean(),
                      const VolumeDensity& omega = VolumeDensity::lebesgue());
/// Dispatches on the field kind; complex fields use the modulus.
double lp_norm(const SampledField& f, double p);
/// ||f||_p^p without the final root.
double lp_norm_pow(const SampledField& f, double p);
/// ||a - b||_p, without materializing the difference field.
double lp_distance(const SampledField& a, const SampledField& b, double p);

SampledField mask_field(const SampledField& f, const BallRegion& region);
/// Keeps the nodes whose flag is non-zero.
SampledField mask_nodes(const SampledField& f, std::span<const char> keep);
std::vector<char> ball_nodes(const ChartDomain& chart, const BallRegion& region);

SampledField field_axpy(double a, const SampledField& f, double b, const SampledField& h);
SampledField field_scale(double a, const SampledField& f);

/// amplitude * exp(1 - 1/(1 - r^2)) with r = |u - center| / radius.
SampledField make_bump(const ChartDomain& chart, const Vec& center, double radius, double amplitude,
                       InterpOrder interp = InterpOrder::Cubic);
/// Scalar bump times a constant direction.
SampledField make_vector_bump(const ChartDomain& chart, const Vec& center, double radius,
                              const Vec& direction, InterpOrder interp = InterpOrder::Cubic);

}  // namespace diffeolab
