#include "diffeolab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace diffeolab {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidChart: return "invalid-chart";
        case ErrorCode::InvalidDensity: return "invalid-density";
        case ErrorCode::InvalidMetric: return "invalid-metric";
        case ErrorCode::OutOfDomain: return "out-of-domain";
        case ErrorCode::InvalidExponent: return "invalid-exponent";
        case ErrorCode::ChartMismatch: return "chart-mismatch";
        case ErrorCode::KindMismatch: return "kind-mismatch";
        case ErrorCode::Region: return "region";
        case ErrorCode::StepBudget: return "step-budget";
        case ErrorCode::Construction: return "construction";
        case ErrorCode::DegenerateField: return "degenerate-field";
        case ErrorCode::MarginViolation: return "margin-violation";
        case ErrorCode::SingularJacobian: return "singular-jacobian";
        case ErrorCode::Precondition: return "precondition";
        case ErrorCode::UnderResolution: return "under-resolution";
        case ErrorCode::Budget: return "budget";
        case ErrorCode::Config: return "config";
        case ErrorCode::Serialization: return "serialization";
    }
    return "unknown";
}

const char* to_string(ChartKind kind) {
    return kind == ChartKind::FlatTorus ? "FlatTorus" : "EuclideanBox";
}

ChartDomain ChartDomain::box(std::vector<double> lower, std::vector<double> upper,
                             std::vector<int> resolution, double boundary_margin) {
    const auto dim = lower.size();
    if (dim < 1 || dim > 3) throw Error(ErrorCode::InvalidChart, "dimension must be 1, 2 or 3");
    if (upper.size() != dim || resolution.size() != dim)
        throw Error(ErrorCode::InvalidChart, "extent and resolution must match the dimension");
    if (!(boundary_margin >= 0.0) || !std::isfinite(boundary_margin))
        throw Error(ErrorCode::InvalidChart, "boundary margin must be finite and >= 0");

    ChartDomain c;
    c.kind_ = ChartKind::EuclideanBox;
    c.dim_ = static_cast<int>(dim);
    c.margin_ = boundary_margin;
    for (std::size_t a = 0; a < dim; ++a) {
        c.lower_[a] = lower[a];
        c.upper_[a] = upper[a];
        c.resolution_[a] = resolution[a];
    }
    c.finalize();
    for (int a = 0; a < c.dim_; ++a)
        if (2.0 * c.margin_ >= c.length(a))
            throw Error(ErrorCode::InvalidChart, "boundary margin leaves no interior");
    return c;
}

ChartDomain ChartDomain::torus(std::vector<double> lower, std::vector<double> upper,
                               std::vector<int> resolution) {
    ChartDomain c = box(std::move(lower), std::move(upper), std::move(resolution), 0.0);
    c.kind_ = ChartKind::FlatTorus;
    c.finalize();
    return c;
}

ChartDomain ChartDomain::unit_torus(int dim, int n) {
    return torus(std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0),
                 std::vector<int>(dim, n));
}

void ChartDomain::finalize() {
    node_count_ = 1;
    for (int a = 0; a < dim_; ++a) {
        if (!(lower_[a] < upper_[a]) || !std::isfinite(lower_[a]) || !std::isfinite(upper_[a]))
            throw Error(ErrorCode::InvalidChart, "extent lower bound must be below upper bound");
        if (resolution_[a] < 2) throw Error(ErrorCode::InvalidChart, "resolution must be >= 2");
        const int n = resolution_[a];
        spacing_[a] = periodic() ? length(a) / n : length(a) / (n - 1);
        auto& w = axis_weights_[a];
        w.assign(static_cast<std::size_t>(n), spacing_[a]);
        if (!periodic()) {
            w.front() *= 0.5;
            w.back() *= 0.5;
        }
        node_count_ *= static_cast<std::size_t>(n);
    }
    for (int a = dim_; a < 3; ++a) {
        resolution_[a] = 1;
        axis_weights_[a].assign(1, 1.0);
    }
    auto weights = std::make_shared<std::vector<double>>(node_count_);
    std::size_t flat = 0;
    for (int i = 0; i < resolution_[0]; ++i)
        for (int j = 0; j < resolution_[1]; ++j)
            for (int k = 0; k < resolution_[2]; ++k)
                (*weights)[flat++] = axis_weights_[0][i] * axis_weights_[1][j] * axis_weights_[2][k];
    node_weights_ = std::move(weights);
}

ChartDomain ChartDomain::with_resolution(int n) const {
    ChartDomain c = *this;
    for (int a = 0; a < dim_; ++a) c.resolution_[a] = n;
    c.finalize();
    return c;
}

double ChartDomain::min_spacing() const {
    double h = spacing_[0];
    for (int a = 1; a < dim_; ++a) h = std::min(h, spacing_[a]);
    return h;
}

double ChartDomain::max_spacing() const {
    double h = spacing_[0];
    for (int a = 1; a < dim_; ++a) h = std::max(h, spacing_[a]);
    return h;
}

std::size_t ChartDomain::flat_index(const std::array<int, 3>& idx) const {
    std::size_t flat = 0;
    for (int a = 0; a < dim_; ++a) flat = flat * static_cast<std::size_t>(resolution_[a]) + idx[a];
    return flat;
}

std::array<int, 3> ChartDomain::multi_index(std::size_t flat) const {
    std::array<int, 3> idx{0, 0, 0};
    for (int a = dim_ - 1; a >= 0; --a) {
        const auto n = static_cast<std::size_t>(resolution_[a]);
        idx[a] = static_cast<int>(flat % n);
        flat /= n;
    }
    return idx;
}

Vec ChartDomain::node(std::size_t flat) const {
    const auto idx = multi_index(flat);
    Vec u(dim_);
    for (int a = 0; a < dim_; ++a) u(a) = lower_[a] + idx[a] * spacing_[a];
    return u;
}

Vec ChartDomain::wrap(const Vec& u) const {
    if (!periodic()) return u;
    Vec w = u;
    for (int a = 0; a < dim_; ++a) {
        const double L = length(a);
        double x = std::fmod(u(a) - lower_[a], L);
        if (x < 0.0) x += L;
        if (x >= L) x -= L;
        w(a) = lower_[a] + x;
    }
    return w;
}

Vec ChartDomain::displacement(const Vec& from, const Vec& to) const {
    Vec d = to - from;
    if (periodic()) {
        for (int a = 0; a < dim_; ++a) {
            const double L = length(a);
            d(a) -= L * std::round(d(a) / L);
        }
    }
    return d;
}

double ChartDomain::distance(const Vec& a, const Vec& b) const { return displacement(a, b).norm(); }

bool ChartDomain::contains(const Vec& u) const {
    if (periodic()) return true;
    for (int a = 0; a < dim_; ++a) {
        const double slack = 1e-12 * length(a);
        if (u(a) < lower_[a] - slack || u(a) > upper_[a] + slack) return false;
    }
    return true;
}

bool ChartDomain::in_collar(const Vec& u) const {
    if (periodic() || margin_ <= 0.0) return false;
    for (int a = 0; a < dim_; ++a)
        if (u(a) - lower_[a] < margin_ || upper_[a] - u(a) < margin_) return true;
    return false;
}

double ChartDomain::interior_clearance(const Vec& u) const {
    if (periodic()) return std::numeric_limits<double>::infinity();
    double c = std::numeric_limits<double>::infinity();
    for (int a = 0; a < dim_; ++a)
        c = std::min({c, u(a) - lower_[a] - margin_, upper_[a] - margin_ - u(a)});
    return c;
}

double ChartDomain::weight(std::size_t flat) const { return (*node_weights_)[flat]; }

bool ChartDomain::operator==(const ChartDomain& o) const {
    if (kind_ != o.kind_ || dim_ != o.dim_ || margin_ != o.margin_) return false;
    for (int a = 0; a < dim_; ++a)
        if (lower_[a] != o.lower_[a] || upper_[a] != o.upper_[a] || resolution_[a] != o.resolution_[a])
            return false;
    return true;
}

bool region_fits(const ChartDomain& chart, const BallRegion& region) {
    if (region.center.size() != chart.dim()) return false;
    if (!(region.radius > 0.0) || !std::isfinite(region.radius)) return false;
    if (chart.periodic()) {
        double half_period = std::numeric_limits<double>::infinity();
        for (int a = 0; a < chart.dim(); ++a) half_period = std::min(half_period, 0.5 * chart.length(a));
        return region.radius < half_period;
    }
    return chart.interior_clearance(region.center) >= region.radius;
}

void validate_region(const ChartDomain& chart, const BallRegion& region) {
    if (!region_fits(chart, region)) {
        std::ostringstream os;
        os << "ball of radius " << region.radius << " does not fit the chart interior";
        throw Error(ErrorCode::Region, os.str());
    }
}

VolumeDensity VolumeDensity::constant(double value) {
    VolumeDensity d;
    d.uniform = true;
    d.uniform_value = value;
    return d;
}

VolumeDensity VolumeDensity::from_function(std::function<double(const Vec&)> fn) {
    VolumeDensity d;
    d.evaluate = std::move(fn);
    return d;
}

MetricField MetricField::from_function(std::function<Mat(const Vec&)> fn) {
    return MetricField{std::move(fn), false};
}

Mat MetricField::operator()(const Vec& u) const {
    if (identity) return Mat::Identity(u.size(), u.size());
    return evaluate(u);
}

std::vector<Vec> grid_points(const ChartDomain& chart) {
    std::vector<Vec> pts;
    pts.reserve(chart.node_count());
    for (std::size_t i = 0; i < chart.node_count(); ++i) pts.push_back(chart.node(i));
    return pts;
}

double integrate(const ChartDomain& chart, std::span<const double> nodal) {
    const auto w = chart.node_weights();
    double sum = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) sum += w[i] * nodal[i];
    return sum;
}

std::vector<double> density_weights(const ChartDomain& chart, const VolumeDensity& omega) {
    std::vector<double> w(chart.node_count());
    for (std::size_t i = 0; i < w.size(); ++i) {
        double rho = omega.uniform ? omega.uniform_value : omega.evaluate(chart.node(i));
        if (!(rho > 0.0) || !std::isfinite(rho))
            throw Error(ErrorCode::InvalidDensity, "volume density must be positive at every node");
        w[i] = chart.weight(i) * rho;
    }
    return w;
}

double total_volume(const ChartDomain& chart, const VolumeDensity& omega) {
    const auto w = density_weights(chart, omega);
    double sum = 0.0;
    for (double x : w) sum += x;
    return sum;
}

void check_spd(const Mat& g) {
    const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
    if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw Error(ErrorCode::InvalidMetric, "metric tensor is not symmetric");
    Eigen::LLT<Mat> llt(g);
    if (llt.info() != Eigen::Success)
        throw Error(ErrorCode::InvalidMetric, "metric tensor is not positive definite");
}

double metric_norm(const Vec& v, const Vec& u, const MetricField& g) {
    if (g.identity) return v.norm();
    const Mat G = g(u);
    check_spd(G);
    return std::sqrt(std::max(0.0, v.dot(G * v)));
}

}  // namespace diffeolab
