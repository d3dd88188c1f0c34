#pragma once

#include "diffeolab/types.hpp"

#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace diffeolab {

enum class ChartKind { EuclideanBox, FlatTorus };

const char* to_string(ChartKind kind);

/// A rectangular computational chart: either a closed box in R^d sampled with
/// both endpoints, or a flat torus sampled without the identified endpoint.
///
/// Box charts carry a zero-padding collar of width `boundary_margin`; every
/// field living on the chart vanishes inside it, which is how compact support
/// is emulated on a bounded domain.
class ChartDomain {
public:
    static ChartDomain box(std::vector<double> lower, std::vector<double> upper,
                           std::vector<int> resolution, double boundary_margin = 0.0);
    static ChartDomain torus(std::vector<double> lower, std::vector<double> upper,
                             std::vector<int> resolution);
    /// Unit torus [0,1)^dim with `n` samples per axis.
    static ChartDomain unit_torus(int dim, int n);

    ChartKind kind() const noexcept { return kind_; }
    bool periodic() const noexcept { return kind_ == ChartKind::FlatTorus; }
    int dim() const noexcept { return dim_; }
    double lower(int axis) const { return lower_[axis]; }
    double upper(int axis) const { return upper_[axis]; }
    double length(int axis) const { return upper_[axis] - lower_[axis]; }
    int resolution(int axis) const { return resolution_[axis]; }
    double boundary_margin() const noexcept { return margin_; }
    double spacing(int axis) const { return spacing_[axis]; }
    double min_spacing() const;
    double max_spacing() const;
    std::size_t node_count() const noexcept { return node_count_; }

    /// Same geometry at a different per-axis resolution.
    ChartDomain with_resolution(int n) const;

    // Row-major node numbering: the last axis varies fastest.
    std::size_t flat_index(const std::array<int, 3>& idx) const;
    std::array<int, 3> multi_index(std::size_t flat) const;
    Vec node(std::size_t flat) const;

    /// Canonical representative of `u` (wrapped into [lower, upper) on a torus).
    Vec wrap(const Vec& u) const;
    /// Shortest displacement from `from` to `to` (minimum image on a torus).
    Vec displacement(const Vec& from, const Vec& to) const;
    double distance(const Vec& a, const Vec& b) const;
    bool contains(const Vec& u) const;
    /// True when `u` lies in the zero collar of a box chart.
    bool in_collar(const Vec& u) const;
    /// Distance from `u` to the margin-free interior boundary (infinite on a torus).
    double interior_clearance(const Vec& u) const;

    /// Quadrature weight of a node: trapezoid on boxes, midpoint on tori.
    double weight(std::size_t flat) const;
    const std::vector<double>& axis_weights(int axis) const { return axis_weights_[axis]; }
    std::span<const double> node_weights() const { return *node_weights_; }

    bool operator==(const ChartDomain& other) const;
    bool operator!=(const ChartDomain& other) const { return !(*this == other); }

private:
    ChartDomain() = default;
    void finalize();

    ChartKind kind_ = ChartKind::EuclideanBox;
    int dim_ = 0;
    std::array<double, 3> lower_{};
    std::array<double, 3> upper_{};
    std::array<int, 3> resolution_{1, 1, 1};
    std::array<double, 3> spacing_{};
    double margin_ = 0.0;
    std::size_t node_count_ = 0;
    std::array<std::vector<double>, 3> axis_weights_;
    std::shared_ptr<const std::vector<double>> node_weights_;
};

/// Open metric ball in chart coordinates; the only strongly convex sets used.
struct BallRegion {
    Vec center;
    double radius = 0.0;

    bool contains(const ChartDomain& chart, const Vec& u) const {
        return chart.distance(center, u) < radius;
    }
};

/// Throws Region if the closed ball is not inside the margin-free interior of
/// a box, or is not embedded (radius >= half the shortest period) on a torus.
void validate_region(const ChartDomain& chart, const BallRegion& region);
bool region_fits(const ChartDomain& chart, const BallRegion& region);

struct VolumeDensity {
    std::function<double(const Vec&)> evaluate;
    bool uniform = false;
    double uniform_value = 1.0;

    static VolumeDensity lebesgue() { return constant(1.0); }
    static VolumeDensity constant(double value);
    static VolumeDensity from_function(std::function<double(const Vec&)> fn);

    double operator()(const Vec& u) const { return uniform ? uniform_value : evaluate(u); }
};

struct MetricField {
    std::function<Mat(const Vec&)> evaluate;
    bool identity = false;

    static MetricField euclidean() { return MetricField{{}, true}; }
    static MetricField from_function(std::function<Mat(const Vec&)> fn);

    Mat operator()(const Vec& u) const;
};

std::vector<Vec> grid_points(const ChartDomain& chart);

/// Sum of weight * value over nodes, accumulated in node order.
double integrate(const ChartDomain& chart, std::span<const double> nodal);
/// Nodal quadrature weights including the density; throws InvalidDensity on
/// a non-positive sample.
std::vector<double> density_weights(const ChartDomain& chart, const VolumeDensity& omega);

double total_volume(const ChartDomain& chart, const VolumeDensity& omega = VolumeDensity::lebesgue());

/// sqrt(v^T g(u) v); throws InvalidMetric if g(u) is not symmetric positive definite.
double metric_norm(const Vec& v, const Vec& u, const MetricField& g);
/// Same check without the norm, used by sweeps over grid nodes.
void check_spd(const Mat& g);

}  // namespace diffeolab
