#include "diffeolab/fields.hpp"

#include "diffeolab/profile.hpp"

#include <array>
#include <cmath>
#include <sstream>

namespace diffeolab {

const char* to_string(FieldKind kind) {
    switch (kind) {
        case FieldKind::Scalar: return "scalar";
        case FieldKind::Vector: return "vector";
        case FieldKind::Complex: return "complex";
    }
    return "unknown";
}

const char* to_string(InterpOrder order) { return order == InterpOrder::Linear ? "linear" : "cubic"; }

int component_count(FieldKind kind, int dim) {
    switch (kind) {
        case FieldKind::Scalar: return 1;
        case FieldKind::Vector: return dim;
        case FieldKind::Complex: return 2;
    }
    return 1;
}

SampledField::SampledField(ChartDomain chart, FieldKind kind, std::vector<double> values,
                           InterpOrder interp)
    : chart_(std::move(chart)),
      kind_(kind),
      interp_(interp),
      components_(component_count(kind, chart_.dim())),
      values_(std::move(values)) {
    if (values_.size() != chart_.node_count() * static_cast<std::size_t>(components_)) {
        std::ostringstream os;
        os << "expected " << chart_.node_count() * components_ << " samples, got " << values_.size();
        throw Error(ErrorCode::Precondition, os.str());
    }
    for (double v : values_)
        if (!std::isfinite(v)) throw Error(ErrorCode::Precondition, "field samples must be finite");
    if (!chart_.periodic() && chart_.boundary_margin() > 0.0) {
        for (std::size_t i = 0; i < chart_.node_count(); ++i) {
            if (!chart_.in_collar(chart_.node(i))) continue;
            for (int c = 0; c < components_; ++c)
                if (values_[i * components_ + c] != 0.0)
                    throw Error(ErrorCode::MarginViolation, "field does not vanish on the boundary collar");
        }
    }
}

SampledField SampledField::zeros(const ChartDomain& chart, FieldKind kind, InterpOrder interp) {
    return SampledField(chart, kind,
                        std::vector<double>(chart.node_count() * component_count(kind, chart.dim()), 0.0),
                        interp);
}

SampledField SampledField::scalar(const ChartDomain& chart, const std::function<double(const Vec&)>& fn,
                                  InterpOrder interp) {
    std::vector<double> v(chart.node_count());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = fn(chart.node(i));
    return SampledField(chart, FieldKind::Scalar, std::move(v), interp);
}

SampledField SampledField::vector(const ChartDomain& chart, const std::function<Vec(const Vec&)>& fn,
                                  InterpOrder interp) {
    const int d = chart.dim();
    std::vector<double> v(chart.node_count() * d);
    for (std::size_t i = 0; i < chart.node_count(); ++i) {
        const Vec x = fn(chart.node(i));
        if (x.size() != d) throw Error(ErrorCode::KindMismatch, "vector generator returned wrong size");
        for (int c = 0; c < d; ++c) v[i * d + c] = x(c);
    }
    return SampledField(chart, FieldKind::Vector, std::move(v), interp);
}

Vec SampledField::value_at(std::size_t node) const {
    Vec v(components_);
    for (int c = 0; c < components_; ++c) v(c) = values_[node * components_ + c];
    return v;
}

SampledField SampledField::with_interp(InterpOrder order) const {
    SampledField copy = *this;
    copy.interp_ = order;
    return copy;
}

namespace {

struct AxisStencil {
    int count = 1;
    std::array<int, 4> index{0, 0, 0, 0};
    std::array<double, 4> weight{1.0, 0.0, 0.0, 0.0};
    int reference = 0;
};

// Grid coordinates closer than this to a node snap onto it, so that maps which
// fix a node up to rounding reproduce the stored sample bit for bit.
constexpr double kSnap = 1e-10;

AxisStencil axis_stencil(const ChartDomain& chart, int axis, double x, InterpOrder order) {
    AxisStencil st;
    const int n = chart.resolution(axis);
    double s = (x - chart.lower(axis)) / chart.spacing(axis);
    if (chart.periodic()) {
        s = std::fmod(s, static_cast<double>(n));
        if (s < 0.0) s += n;
    } else if (s < -1e-9 || s > (n - 1) + 1e-9) {
        std::ostringstream os;
        os << "point coordinate " << x << " outside axis " << axis << " of the box chart";
        throw Error(ErrorCode::OutOfDomain, os.str());
    }
    const double r = std::round(s);
    if (std::abs(s - r) < kSnap) s = r;
    if (chart.periodic()) {
        if (s >= n) s -= n;
    } else {
        s = std::min(std::max(s, 0.0), static_cast<double>(n - 1));
    }

    int i = static_cast<int>(std::floor(s));
    if (!chart.periodic() && i > n - 2) i = n - 2;
    auto wrap = [&](int k) {
        if (!chart.periodic()) return k;
        k %= n;
        return k < 0 ? k + n : k;
    };

    const bool cubic = order == InterpOrder::Cubic && n >= 4;
    if (!cubic) {
        const double t = s - i;
        st.count = 2;
        st.index = {wrap(i), wrap(i + 1), 0, 0};
        st.weight = {1.0 - t, t, 0.0, 0.0};
        st.reference = wrap(i);
        return st;
    }
    int base = i - 1;
    if (!chart.periodic()) base = std::min(std::max(base, 0), n - 4);
    const double t = s - base;
    // Lagrange basis on the nodes 0, 1, 2, 3 of the local stencil.
    const double t0 = t, t1 = t - 1.0, t2 = t - 2.0, t3 = t - 3.0;
    st.count = 4;
    st.weight = {-t1 * t2 * t3 / 6.0, t0 * t2 * t3 / 2.0, -t0 * t1 * t3 / 2.0, t0 * t1 * t2 / 6.0};
    for (int k = 0; k < 4; ++k) st.index[k] = wrap(base + k);
    st.reference = wrap(i);
    return st;
}

}  // namespace

Vec SampledField::eval(const Vec& u, InterpOrder order) const {
    const int d = chart_.dim();
    if (u.size() != d) throw Error(ErrorCode::Precondition, "point dimension does not match the chart");
    std::array<AxisStencil, 3> st;
    for (int a = 0; a < d; ++a) st[a] = axis_stencil(chart_, a, u(a), order);

    const int nc = components_;
    const std::size_t ref = chart_.flat_index({st[0].reference, st[1].reference, st[2].reference});
    std::array<double, 3> out{};
    std::array<double, 3> base{};
    for (int c = 0; c < nc; ++c) base[c] = values_[ref * nc + c];

    // Accumulate offsets from a stencil node so constants are reproduced exactly.
    const std::size_t n1 = static_cast<std::size_t>(chart_.resolution(1));
    const std::size_t n2 = static_cast<std::size_t>(chart_.resolution(2));
    for (int a = 0; a < st[0].count; ++a) {
        const double wa = st[0].weight[a];
        if (wa == 0.0) continue;
        for (int b = 0; b < st[1].count; ++b) {
            const double wab = wa * st[1].weight[b];
            if (wab == 0.0) continue;
            for (int k = 0; k < st[2].count; ++k) {
                const double w = wab * st[2].weight[k];
                if (w == 0.0) continue;
                const std::size_t flat =
                    (static_cast<std::size_t>(st[0].index[a]) * n1 + st[1].index[b]) * n2 + st[2].index[k];
                for (int c = 0; c < nc; ++c) out[c] += w * (values_[flat * nc + c] - base[c]);
            }
        }
    }
    Vec v(nc);
    for (int c = 0; c < nc; ++c) v(c) = base[c] + out[c];
    return v;
}

double SampledField::eval_scalar(const Vec& u) const { return eval(u)(0); }

Vec eval_field(const SampledField& f, const Vec& u) { return f.eval(u); }

void require_same_chart(const SampledField& a, const SampledField& b) {
    if (a.chart() != b.chart()) throw Error(ErrorCode::ChartMismatch, "fields live on different charts");
    if (a.kind() != b.kind()) throw Error(ErrorCode::KindMismatch, "fields have different kinds");
}

namespace {

void check_exponent(double p) {
    if (!(p >= 1.0) || !std::isfinite(p)) throw Error(ErrorCode::InvalidExponent, "exponent p must satisfy 1 <= p < inf");
}

double pow_abs(double x, double p) {
    x = std::abs(x);
    if (p == 1.0) return x;
    if (p == 2.0) return x * x;
    return std::pow(x, p);
}

double root(double s, double p) {
    if (p == 1.0) return s;
    if (p == 2.0) return std::sqrt(s);
    return std::pow(s, 1.0 / p);
}

// |v|^p for the node's components with the Euclidean component norm.
double node_magnitude_pow(std::span<const double> vals, std::size_t node, int nc, double p) {
    if (nc == 1) return pow_abs(vals[node], p);
    double sq = 0.0;
    for (int c = 0; c < nc; ++c) {
        const double x = vals[node * nc + c];
        sq += x * x;
    }
    if (p == 2.0) return sq;
    return std::pow(sq, 0.5 * p);
}

std::vector<double> weights_for(const ChartDomain& chart, const VolumeDensity& omega) {
    if (omega.uniform && omega.uniform_value == 1.0)
        return std::vector<double>(chart.node_weights().begin(), chart.node_weights().end());
    return density_weights(chart, omega);
}

}  // namespace

double lp_norm_scalar(const SampledField& f, double p, const VolumeDensity& omega) {
    check_exponent(p);
    if (f.kind() != FieldKind::Scalar) throw Error(ErrorCode::KindMismatch, "scalar norm of a non-scalar field");
    const auto w = weights_for(f.chart(), omega);
    const auto vals = f.values();
    double sum = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) sum += w[i] * pow_abs(vals[i], p);
    return root(sum, p);
}

double lp_norm_vector(const SampledField& f, double p, const MetricField& g, const VolumeDensity& omega) {
    check_exponent(p);
    if (f.kind() != FieldKind::Vector) throw Error(ErrorCode::KindMismatch, "vector norm of a non-vector field");
    const auto w = weights_for(f.chart(), omega);
    const auto vals = f.values();
    const int nc = f.components();
    double sum = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        double sq;
        if (g.identity) {
            sq = 0.0;
            for (int c = 0; c < nc; ++c) sq += vals[i * nc + c] * vals[i * nc + c];
        } else {
            const Vec u = f.chart().node(i);
            const Mat G = g(u);
            check_spd(G);
            const Vec v = f.value_at(i);
            sq = std::max(0.0, v.dot(G * v));
        }
        sum += w[i] * (p == 2.0 ? sq : std::pow(sq, 0.5 * p));
    }
    return root(sum, p);
}

double lp_norm_pow(const SampledField& f, double p) {
    check_exponent(p);
    const auto w = f.chart().node_weights();
    const auto vals = f.values();
    const int nc = f.components();
    double sum = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) sum += w[i] * node_magnitude_pow(vals, i, nc, p);
    return sum;
}

double lp_norm(const SampledField& f, double p) { return root(lp_norm_pow(f, p), p); }

double lp_distance(const SampledField& a, const SampledField& b, double p) {
    check_exponent(p);
    if (a.chart() != b.chart()) throw Error(ErrorCode::ChartMismatch, "fields live on different charts");
    if (a.components() != b.components()) throw Error(ErrorCode::KindMismatch, "component counts differ");
    const auto w = a.chart().node_weights();
    const auto va = a.values();
    const auto vb = b.values();
    const int nc = a.components();
    double sum = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        double sq = 0.0;
        for (int c = 0; c < nc; ++c) {
            const double d = va[i * nc + c] - vb[i * nc + c];
            sq += d * d;
        }
        sum += w[i] * (p == 2.0 ? sq : p == 1.0 ? std::sqrt(sq) : std::pow(sq, 0.5 * p));
    }
    return root(sum, p);
}

std::vector<char> ball_nodes(const ChartDomain& chart, const BallRegion& region) {
    std::vector<char> keep(chart.node_count(), 0);
    for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = region.contains(chart, chart.node(i)) ? 1 : 0;
    return keep;
}

SampledField mask_nodes(const SampledField& f, std::span<const char> keep) {
    if (keep.size() != f.node_count()) throw Error(ErrorCode::Precondition, "mask size does not match the grid");
    std::vector<double> v(f.values().begin(), f.values().end());
    const int nc = f.components();
    for (std::size_t i = 0; i < keep.size(); ++i)
        if (!keep[i])
            for (int c = 0; c < nc; ++c) v[i * nc + c] = 0.0;
    return SampledField(f.chart(), f.kind(), std::move(v), f.interp_order());
}

SampledField mask_field(const SampledField& f, const BallRegion& region) {
    if (region.center.size() != f.chart().dim())
        throw Error(ErrorCode::Region, "ball center dimension does not match the chart");
    return mask_nodes(f, ball_nodes(f.chart(), region));
}

SampledField field_axpy(double a, const SampledField& f, double b, const SampledField& h) {
    require_same_chart(f, h);
    std::vector<double> v(f.values().size());
    const auto fv = f.values();
    const auto hv = h.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a * fv[i] + b * hv[i];
    return SampledField(f.chart(), f.kind(), std::move(v), f.interp_order());
}

SampledField field_scale(double a, const SampledField& f) {
    std::vector<double> v(f.values().begin(), f.values().end());
    for (double& x : v) x *= a;
    return SampledField(f.chart(), f.kind(), std::move(v), f.interp_order());
}

SampledField make_bump(const ChartDomain& chart, const Vec& center, double radius, double amplitude,
                       InterpOrder interp) {
    validate_region(chart, BallRegion{center, radius});
    return SampledField::scalar(
        chart,
        [&](const Vec& u) {
            const double r = chart.distance(center, u) / radius;
            return r < 1.0 ? amplitude * bump_profile(r) : 0.0;
        },
        interp);
}

SampledField make_vector_bump(const ChartDomain& chart, const Vec& center, double radius,
                              const Vec& direction, InterpOrder interp) {
    validate_region(chart, BallRegion{center, radius});
    if (direction.size() != chart.dim()) throw Error(ErrorCode::KindMismatch, "direction dimension mismatch");
    return SampledField::vector(
        chart,
        [&](const Vec& u) -> Vec {
            const double r = chart.distance(center, u) / radius;
            const double b = r < 1.0 ? bump_profile(r) : 0.0;
            return b * direction;
        },
        interp);
}

}  // namespace diffeolab
