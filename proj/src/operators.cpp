#include "diffeolab/operators.hpp"

#include "diffeolab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

namespace diffeolab {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

const std::map<std::string, ScalarFunction>& registry() {
    static const std::map<std::string, ScalarFunction> table = [] {
        std::map<std::string, ScalarFunction> t;
        auto add = [&](std::string name, std::function<double(double)> fn, double lip) {
            t.emplace(name, ScalarFunction{name, std::move(fn), lip});
        };
        add("identity", [](double x) { return x; }, 1.0);
        add("relu", [](double x) { return x > 0.0 ? x : 0.0; }, 1.0);
        add("tanh", [](double x) { return std::tanh(x); }, 1.0);
        add("abs", [](double x) { return std::abs(x); }, 1.0);
        add("sigmoid", [](double x) { return 1.0 / (1.0 + std::exp(-x)); }, 0.25);
        add("softplus", [](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }, 1.0);
        add("sin", [](double x) { return std::sin(x); }, 1.0);
        return t;
    }();
    return table;
}

std::string fmt(double x) {
    std::ostringstream os;
    os << x;
    return os.str();
}

}  // namespace

const ScalarFunction& scalar_function(const std::string& name) {
    const auto& t = registry();
    auto it = t.find(name);
    if (it == t.end()) throw Error(ErrorCode::Config, "unknown scalar function '" + name + "'");
    return it->second;
}

std::vector<std::string> scalar_function_names() {
    std::vector<std::string> out;
    for (const auto& [k, v] : registry()) out.push_back(k);
    return out;
}

double sampled_lipschitz(const ScalarFunction& rho, int pairs, double range, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-range, range);
    double best = 0.0;
    for (int i = 0; i < pairs; ++i) {
        const double x = unit(rng), y = unit(rng);
        if (x == y) continue;
        best = std::max(best, std::abs(rho.fn(x) - rho.fn(y)) / std::abs(x - y));
    }
    return best;
}

OperatorSpec OperatorSpec::pointwise(const std::string& rho) {
    scalar_function(rho);
    return {op::PointwiseScalar{rho}, "pointwise(" + rho + ")"};
}
OperatorSpec OperatorSpec::scalar_multiple(double lambda) {
    return {op::ScalarMultipleVector{lambda}, "scalar_multiple(" + fmt(lambda) + ")"};
}
OperatorSpec OperatorSpec::vector_gain(const std::string& rho) {
    scalar_function(rho);
    return {op::PointwiseVectorGain{rho}, "vector_gain(" + rho + ")"};
}
OperatorSpec OperatorSpec::blur(double sigma) {
    if (!(sigma > 0.0)) throw Error(ErrorCode::Precondition, "blur sigma must be positive");
    return {op::GaussianBlur{sigma}, "blur(" + fmt(sigma) + ")"};
}
OperatorSpec OperatorSpec::sup() { return {op::SupOperator{}, "sup"}; }
OperatorSpec OperatorSpec::exp_phase() { return {op::ExpPhase{}, "exp_phase"}; }
OperatorSpec OperatorSpec::sqrt_pointwise() { return {op::SqrtPointwise{}, "sqrt"}; }
OperatorSpec OperatorSpec::local_average(double radius) {
    if (!(radius > 0.0)) throw Error(ErrorCode::Precondition, "averaging radius must be positive");
    return {op::LocalAverage{radius}, "local_average(" + fmt(radius) + ")"};
}

const char* OperatorSpec::kind_name() const {
    return std::visit(overloaded{[](const op::PointwiseScalar&) { return "pointwise"; },
                                 [](const op::ScalarMultipleVector&) { return "scalar_multiple"; },
                                 [](const op::PointwiseVectorGain&) { return "vector_gain"; },
                                 [](const op::GaussianBlur&) { return "blur"; },
                                 [](const op::SupOperator&) { return "sup"; },
                                 [](const op::ExpPhase&) { return "exp_phase"; },
                                 [](const op::SqrtPointwise&) { return "sqrt"; },
                                 [](const op::LocalAverage&) { return "local_average"; }},
                      kind);
}

bool OperatorSpec::accepts(FieldKind fk) const {
    if (fk == FieldKind::Complex) return false;
    return std::visit(overloaded{[&](const op::ScalarMultipleVector&) { return fk == FieldKind::Vector; },
                                 [&](const op::PointwiseVectorGain&) { return fk == FieldKind::Vector; },
                                 [&](const op::GaussianBlur&) { return true; },
                                 [&](const op::LocalAverage&) { return true; },
                                 [&](const auto&) { return fk == FieldKind::Scalar; }},
                      kind);
}

bool OperatorSpec::pointwise_kind() const {
    return std::holds_alternative<op::PointwiseScalar>(kind) || std::holds_alternative<op::ScalarMultipleVector>(kind) ||
           std::holds_alternative<op::PointwiseVectorGain>(kind) || std::holds_alternative<op::ExpPhase>(kind) ||
           std::holds_alternative<op::SqrtPointwise>(kind);
}

namespace {

// Nonlocal outputs are forced to zero on a box collar, where every field
// must vanish.
void clear_collar(const ChartDomain& chart, std::vector<double>& v, int nc) {
    if (chart.periodic() || chart.boundary_margin() <= 0.0) return;
    for (std::size_t i = 0; i < chart.node_count(); ++i)
        if (chart.in_collar(chart.node(i)))
            for (int c = 0; c < nc; ++c) v[i * nc + c] = 0.0;
}

// One 1-D convolution pass along `axis` with a symmetric kernel.
std::vector<double> convolve_axis(const ChartDomain& chart, const std::vector<double>& in, int nc, int axis,
                                  const std::vector<double>& kernel) {
    const int R = static_cast<int>(kernel.size()) - 1;
    const int n = chart.resolution(axis);
    std::size_t stride = static_cast<std::size_t>(nc);
    for (int a = chart.dim() - 1; a > axis; --a) stride *= chart.resolution(a);
    const std::size_t total = chart.node_count();
    std::vector<double> out(in.size(), 0.0);
    parallel_for(total, [&](std::size_t begin, std::size_t end) {
        for (std::size_t node = begin; node < end; ++node) {
            const int i = chart.multi_index(node)[axis];
            const std::size_t row0 = node * nc - static_cast<std::size_t>(i) * stride;
            for (int c = 0; c < nc; ++c) {
                double acc = 0.0;
                for (int k = -R; k <= R; ++k) {
                    int j = i + k;
                    if (chart.periodic()) {
                        j %= n;
                        if (j < 0) j += n;
                    } else if (j < 0 || j >= n) {
                        continue;
                    }
                    acc += kernel[std::abs(k)] * in[row0 + static_cast<std::size_t>(j) * stride + c];
                }
                out[node * nc + c] = acc;
            }
        }
    });
    return out;
}

std::vector<double> gaussian_blur(const SampledField& f, double sigma) {
    const ChartDomain& chart = f.chart();
    std::vector<double> v(f.values().begin(), f.values().end());
    for (int a = 0; a < chart.dim(); ++a) {
        const double h = chart.spacing(a);
        const int R = static_cast<int>(std::ceil(4.0 * sigma / h));
        std::vector<double> kernel(R + 1);
        double sum = 0.0;
        for (int k = 0; k <= R; ++k) {
            kernel[k] = std::exp(-0.5 * (k * h) * (k * h) / (sigma * sigma));
            sum += k == 0 ? kernel[k] : 2.0 * kernel[k];
        }
        for (double& w : kernel) w /= sum;
        v = convolve_axis(chart, v, f.components(), a, kernel);
    }
    return v;
}

// Averages over the lattice offsets within `radius`. The last axis is handled
// with prefix sums, so each output node costs one lookup per offset row.
std::vector<double> local_average(const SampledField& f, double radius) {
    const ChartDomain& chart = f.chart();
    const int d = chart.dim();
    const int nc = f.components();
    const int last = d - 1;
    const int nl = chart.resolution(last);
    const double hl = chart.spacing(last);

    struct Row {
        std::array<int, 3> offset;
        int half;
    };
    std::vector<Row> rows;
    std::array<int, 3> reach{0, 0, 0};
    for (int a = 0; a < last; ++a) reach[a] = static_cast<int>(std::floor(radius / chart.spacing(a) + 1e-12));
    std::size_t count = 0;
    for (int i = -reach[0]; i <= reach[0]; ++i)
        for (int j = -reach[1]; j <= reach[1]; ++j) {
            std::array<int, 3> off{0, 0, 0};
            double sq = 0.0;
            if (last >= 1) {
                off[0] = i;
                sq += std::pow(i * chart.spacing(0), 2);
            }
            if (last >= 2) {
                off[1] = j;
                sq += std::pow(j * chart.spacing(1), 2);
            } else if (j != 0) {
                continue;
            }
            if (sq > radius * radius * (1.0 + 1e-12)) continue;
            const int half = static_cast<int>(std::floor(std::sqrt(std::max(0.0, radius * radius - sq)) / hl + 1e-12));
            rows.push_back({off, half});
            count += 2 * half + 1;
        }

    // Prefix sums along the last axis for every line and component.
    const std::size_t lines = chart.node_count() / nl;
    std::vector<double> prefix(lines * (nl + 1) * nc, 0.0);
    const auto vals = f.values();
    for (std::size_t line = 0; line < lines; ++line)
        for (int c = 0; c < nc; ++c) {
            double acc = 0.0;
            prefix[(line * (nl + 1)) * nc + c] = 0.0;
            for (int k = 0; k < nl; ++k) {
                acc += vals[(line * nl + k) * nc + c];
                prefix[(line * (nl + 1) + k + 1) * nc + c] = acc;
            }
        }
    auto range_sum = [&](std::size_t line, int lo, int hi, int c) {
        // Sum over last-axis indices lo..hi inclusive, clipped or wrapped.
        if (!chart.periodic()) {
            lo = std::max(lo, 0);
            hi = std::min(hi, nl - 1);
            if (lo > hi) return 0.0;
            return prefix[(line * (nl + 1) + hi + 1) * nc + c] - prefix[(line * (nl + 1) + lo) * nc + c];
        }
        double s = 0.0;
        const double full = prefix[(line * (nl + 1) + nl) * nc + c];
        int len = hi - lo + 1;
        while (len >= nl) {
            s += full;
            len -= nl;
        }
        if (len == 0) return s;
        int a = ((lo % nl) + nl) % nl;
        int b = a + len - 1;
        if (b < nl) return s + prefix[(line * (nl + 1) + b + 1) * nc + c] - prefix[(line * (nl + 1) + a) * nc + c];
        s += full - prefix[(line * (nl + 1) + a) * nc + c];
        return s + prefix[(line * (nl + 1) + (b - nl) + 1) * nc + c];
    };

    std::vector<double> out(vals.size(), 0.0);
    const double inv = 1.0 / static_cast<double>(count);
    parallel_for(chart.node_count(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t node = begin; node < end; ++node) {
            const auto idx = chart.multi_index(node);
            for (const Row& row : rows) {
                std::array<int, 3> src = idx;
                bool inside = true;
                for (int a = 0; a < last; ++a) {
                    src[a] += row.offset[a];
                    const int n = chart.resolution(a);
                    if (chart.periodic()) src[a] = ((src[a] % n) + n) % n;
                    else if (src[a] < 0 || src[a] >= n) inside = false;
                }
                if (!inside) continue;
                src[last] = 0;
                const std::size_t line = chart.flat_index(src) / nl;
                for (int c = 0; c < nc; ++c)
                    out[node * nc + c] += range_sum(line, idx[last] - row.half, idx[last] + row.half, c);
            }
            for (int c = 0; c < nc; ++c) out[node * nc + c] *= inv;
        }
    });
    return out;
}

}  // namespace

SampledField apply(const OperatorSpec& M, const SampledField& f, ApplyDiagnostics* diag) {
    if (!M.accepts(f.kind())) {
        std::ostringstream os;
        os << M.label << " does not act on " << to_string(f.kind()) << " fields";
        throw Error(ErrorCode::KindMismatch, os.str());
    }
    const ChartDomain& chart = f.chart();
    const auto vals = f.values();
    const int nc = f.components();
    const std::size_t n = f.node_count();

    return std::visit(
        overloaded{
            [&](const op::PointwiseScalar& o) {
                const auto& rho = scalar_function(o.rho).fn;
                std::vector<double> v(n);
                for (std::size_t i = 0; i < n; ++i) v[i] = rho(vals[i]);
                return SampledField(chart, FieldKind::Scalar, std::move(v), f.interp_order());
            },
            [&](const op::ScalarMultipleVector& o) { return field_scale(o.lambda, f); },
            [&](const op::PointwiseVectorGain& o) {
                const auto& rho = scalar_function(o.rho).fn;
                std::vector<double> v(vals.size(), 0.0);
                for (std::size_t i = 0; i < n; ++i) {
                    double sq = 0.0;
                    for (int c = 0; c < nc; ++c) sq += vals[i * nc + c] * vals[i * nc + c];
                    if (sq == 0.0) continue;
                    const double r = std::sqrt(sq);
                    const double g = rho(r) / r;
                    for (int c = 0; c < nc; ++c) v[i * nc + c] = g * vals[i * nc + c];
                }
                return SampledField(chart, FieldKind::Vector, std::move(v), f.interp_order());
            },
            [&](const op::GaussianBlur& o) {
                auto v = gaussian_blur(f, o.sigma);
                clear_collar(chart, v, nc);
                return SampledField(chart, f.kind(), std::move(v), f.interp_order());
            },
            [&](const op::SupOperator&) {
                double m = 0.0;
                for (double x : vals) m = std::max(m, std::abs(x));
                return SampledField(chart, FieldKind::Scalar, std::vector<double>(n, m), f.interp_order());
            },
            [&](const op::ExpPhase&) {
                std::vector<double> v(2 * n);
                for (std::size_t i = 0; i < n; ++i) {
                    v[2 * i] = std::cos(vals[i]);
                    v[2 * i + 1] = std::sin(vals[i]);
                }
                return SampledField(chart, FieldKind::Complex, std::move(v), f.interp_order());
            },
            [&](const op::SqrtPointwise&) {
                std::vector<double> v(n);
                std::size_t negative = 0;
                for (std::size_t i = 0; i < n; ++i) {
                    if (vals[i] < 0.0) ++negative;
                    v[i] = std::sqrt(std::max(vals[i], 0.0));
                }
                if (diag) diag->negative_inputs += negative;
                return SampledField(chart, FieldKind::Scalar, std::move(v), f.interp_order());
            },
            [&](const op::LocalAverage& o) {
                auto v = local_average(f, o.radius);
                clear_collar(chart, v, nc);
                return SampledField(chart, f.kind(), std::move(v), f.interp_order());
            }},
        M.kind);
}

SampledField m_zero_image(const OperatorSpec& M, const ChartDomain& chart, FieldKind kind) {
    return apply(M, SampledField::zeros(chart, kind));
}

bool is_constant_field(const SampledField& f) {
    const auto v = f.values();
    const int nc = f.components();
    for (std::size_t i = 1; i < f.node_count(); ++i)
        for (int c = 0; c < nc; ++c)
            if (v[i * nc + c] != v[c]) return false;
    return true;
}

double lipschitz_estimate(const OperatorSpec& M, double p, int trials, const ChartDomain& chart,
                          const LipschitzProbe& probe, std::uint64_t seed) {
    if (trials < 1) throw Error(ErrorCode::Precondition, "trials must be >= 1");
    const FieldKind kind = M.accepts(FieldKind::Scalar) ? FieldKind::Scalar : FieldKind::Vector;
    const int d = chart.dim();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    double min_len = std::numeric_limits<double>::infinity();
    for (int a = 0; a < d; ++a) min_len = std::min(min_len, chart.length(a));
    const double rmin = 4.0 * chart.max_spacing();
    const double rmax = std::max(1.5 * rmin, 0.25 * min_len);

    auto random_bump = [&](double amplitude, bool positive) {
        for (int attempt = 0; attempt < 100; ++attempt) {
            BallRegion ball;
            ball.radius = rmin + (rmax - rmin) * unit(rng);
            ball.center = Vec(d);
            for (int a = 0; a < d; ++a) ball.center(a) = chart.lower(a) + chart.length(a) * unit(rng);
            if (!region_fits(chart, ball)) continue;
            if (kind == FieldKind::Scalar)
                return make_bump(chart, ball.center, ball.radius, positive || unit(rng) < 0.5 ? amplitude : -amplitude);
            Vec dir(d);
            for (int a = 0; a < d; ++a) dir(a) = gauss(rng);
            return make_vector_bump(chart, ball.center, ball.radius, amplitude * dir.normalized());
        }
        return SampledField::zeros(chart, kind);
    };

    const bool positive = std::holds_alternative<op::SqrtPointwise>(M.kind) && probe.near_zero;
    double best = 0.0;
    for (int t = 0; t < trials; ++t) {
        const double dist = probe.pair_distance > 0.0 ? probe.pair_distance : std::pow(10.0, -3.0 * unit(rng));
        SampledField f = probe.near_zero ? field_scale(unit(rng), random_bump(dist, positive))
                                         : field_axpy(1.0, random_bump(1.0, false), 1.0, random_bump(0.5, false));
        const SampledField h = field_axpy(1.0, f, 1.0, random_bump(dist, positive));
        const double denom = lp_distance(f, h, p);
        if (denom == 0.0) continue;
        best = std::max(best, lp_distance(apply(M, f), apply(M, h), p) / denom);
    }
    return best;
}

}  // namespace diffeolab
