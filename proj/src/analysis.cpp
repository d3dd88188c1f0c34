#include "diffeolab/analysis.hpp"

#include "diffeolab/parallel.hpp"

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>
#include <queue>
#include <random>
#include <sstream>

namespace diffeolab {

const char* to_string(Verdict v) { return v == Verdict::Consistent ? "consistent" : "falsified"; }

namespace {

std::vector<int> grid_of(const ChartDomain& chart) {
    std::vector<int> g;
    for (int a = 0; a < chart.dim(); ++a) g.push_back(chart.resolution(a));
    return g;
}

}  // namespace

DefectReport equivariance_defect(const OperatorSpec& M, const TransportPlan& plan, const SampledField& f, double p,
                                 const std::string& field_label) {
    const SampledField Mf = apply(M, f);
    const SampledField MLf = apply(M, pullback(plan, f).field);
    const SampledField LMf = pullback(plan, Mf).field;
    DefectReport r;
    r.operator_label = M.label;
    r.diffeo_label = plan.diffeo().label();
    r.field_label = field_label;
    r.p = p;
    r.grid = grid_of(f.chart());
    r.defect_abs = lp_distance(MLf, LMf, p);
    const double denom = std::max(lp_norm(LMf, p), kNormFloor);
    r.defect_rel = r.defect_abs / denom;
    if (!plan.moved().empty()) {
        const SampledField LMf_linear = pullback(plan, Mf.with_interp(InterpOrder::Linear)).field;
        r.interp_residual = lp_distance(LMf, LMf_linear, p) / denom;
    }
    return r;
}

DefectReport equivariance_defect(const OperatorSpec& M, const Diffeo& phi, const SampledField& f, double p,
                                 const std::string& field_label) {
    return equivariance_defect(M, TransportPlan(phi, f.chart(), f.kind() == FieldKind::Vector), f, p, field_label);
}

// ------------------------------------------------------------------ suites

bool exceeds_baseline(const DefectReport& r, const SuiteSettings& s) {
    return r.defect_rel > s.baseline_factor * r.interp_residual && r.defect_rel > s.noise_floor;
}

namespace {

struct FitAccumulator {
    double mm = 0.0, mf = 0.0, ff = 0.0;

    void add(const SampledField& Mf, const SampledField& f) {
        const auto w = f.chart().node_weights();
        const auto a = Mf.values();
        const auto b = f.values();
        const int nc = f.components();
        for (std::size_t i = 0; i < w.size(); ++i)
            for (int c = 0; c < nc; ++c) {
                const double x = a[i * nc + c], y = b[i * nc + c];
                mm += w[i] * x * x;
                mf += w[i] * x * y;
                ff += w[i] * y * y;
            }
    }
};

SuiteResult run_suite(const OperatorSpec& M, FieldKind kind, const std::vector<DiffeoFactory>& diffeos,
                      const std::vector<FieldFactory>& fields, const SuiteSettings& settings) {
    if (settings.levels.empty()) throw Error(ErrorCode::Precondition, "suite needs at least one refinement level");
    if (!M.accepts(kind)) throw Error(ErrorCode::KindMismatch, M.label + " does not act on this field kind");
    std::vector<const FieldFactory*> usable;
    for (const auto& ff : fields)
        if (ff.kind == kind) usable.push_back(&ff);

    SuiteResult out;
    FitAccumulator fit;
    const std::size_t L = settings.levels.size();
    // reports indexed [combo][level]
    std::vector<std::vector<DefectReport>> grid;
    int combos = 0;
    for (const auto& df : diffeos) {
        if (combos >= settings.budget) break;
        const int take = std::min<int>(static_cast<int>(usable.size()), settings.budget - combos);
        const std::size_t first = grid.size();
        grid.resize(first + take, std::vector<DefectReport>(L));
        for (std::size_t lv = 0; lv < L; ++lv) {
            const ChartDomain& chart = settings.levels[lv];
            const TransportPlan plan(df.make(chart), chart, kind == FieldKind::Vector);
            for (int k = 0; k < take; ++k) {
                const SampledField f = usable[k]->make(chart);
                DefectReport r = equivariance_defect(M, plan, f, settings.p, usable[k]->label);
                r.diffeo_label = df.label;
                grid[first + k][lv] = r;
                if (kind == FieldKind::Vector) {
                    const SampledField Lf = pullback(plan, f).field;
                    fit.add(apply(M, Lf), Lf);
                }
            }
        }
        combos += take;
    }

    double worst = -1.0;
    for (const auto& row : grid) {
        for (const auto& r : row) out.reports.push_back(r);
        for (std::size_t lv = 0; lv + 1 < L; ++lv) {
            if (exceeds_baseline(row[lv], settings) && exceeds_baseline(row[lv + 1], settings) &&
                row[lv + 1].defect_rel > worst) {
                worst = row[lv + 1].defect_rel;
                out.witness = row[lv + 1];
            }
        }
    }
    out.verdict = out.witness ? Verdict::Falsified : Verdict::Consistent;

    if (kind == FieldKind::Vector && fit.ff > 0.0) {
        out.fitted_lambda = fit.mf / fit.ff;
        const double res = std::max(0.0, fit.mm - 2.0 * out.fitted_lambda * fit.mf +
                                             out.fitted_lambda * out.fitted_lambda * fit.ff);
        out.fit_residual = fit.mm > 0.0 ? std::sqrt(res / fit.mm) : 0.0;
    }

    // Mask-commutation probe on the finest level, for operators fixing 0.
    if (!usable.empty()) {
        const ChartDomain& chart = settings.levels.back();
        const SampledField zero = m_zero_image(M, chart, kind);
        bool zero_preserving = true;
        for (double v : zero.values()) zero_preserving = zero_preserving && v == 0.0;
        if (zero_preserving) {
            Vec c(chart.dim());
            double min_len = std::numeric_limits<double>::infinity();
            for (int a = 0; a < chart.dim(); ++a) {
                c(a) = 0.5 * (chart.lower(a) + chart.upper(a));
                min_len = std::min(min_len, chart.length(a));
            }
            const SampledField f = usable.front()->make(chart);
            const double loc = localization_check(M, f, BallRegion{c, 0.15 * min_len}, settings.p);
            out.locality_ok = loc <= settings.noise_floor * std::max(1.0, lp_norm(f, settings.p));
        }
    }
    return out;
}

}  // namespace

SuiteResult falsification_suite_scalar(const OperatorSpec& M, const std::vector<DiffeoFactory>& diffeos,
                                       const std::vector<FieldFactory>& fields, const SuiteSettings& settings) {
    return run_suite(M, FieldKind::Scalar, diffeos, fields, settings);
}

SuiteResult falsification_suite_vector(const OperatorSpec& M, const std::vector<DiffeoFactory>& diffeos,
                                       const std::vector<FieldFactory>& fields, const SuiteSettings& settings) {
    return run_suite(M, FieldKind::Vector, diffeos, fields, settings);
}

// ------------------------------------------------------------------- decay

DecayCurve contraction_decay_test(const SampledField& f, const Vec& center, const std::vector<int>& n_values, double p,
                                  double scale, double eps) {
    if (n_values.empty()) throw Error(ErrorCode::Precondition, "n_values must not be empty");
    for (std::size_t i = 1; i < n_values.size(); ++i)
        if (n_values[i] <= n_values[i - 1]) throw Error(ErrorCode::Precondition, "n_values must be strictly increasing");
    if (f.kind() == FieldKind::Complex) throw Error(ErrorCode::KindMismatch, "decay test needs a scalar or vector field");
    const ChartDomain& chart = f.chart();
    const int d = chart.dim();
    const int n_max = n_values.back();
    if (2.0 * scale / n_max < 8.0 * chart.max_spacing()) {
        std::ostringstream os;
        os << "image ball of radius " << scale / n_max << " spans fewer than 8 cells (h = " << chart.max_spacing() << ")";
        throw Error(ErrorCode::UnderResolution, os.str());
    }
    const SampledField masked = mask_field(f, BallRegion{center, scale});

    DecayCurve curve;
    curve.n_values = n_values;
    curve.baseline = lp_norm_pow(masked, p);
    curve.bound_exponent = f.kind() == FieldKind::Vector ? d + 1 : d;
    for (int n : n_values) {
        const Diffeo psi = make_contraction(chart, n, eps, center, scale).inverted();
        curve.norms.push_back(lp_norm_pow(pullback(psi, masked).field, p));
        curve.bounds.push_back(curve.baseline * std::pow(double(n), -curve.bound_exponent));
    }
    if (n_values.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double m = static_cast<double>(n_values.size());
        for (std::size_t i = 0; i < n_values.size(); ++i) {
            const double x = std::log(double(n_values[i])), y = std::log(curve.norms[i]);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        curve.fitted_rate = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    }
    return curve;
}

// ------------------------------------------------------- node-set identities

double localization_check(const OperatorSpec& M, const SampledField& f, const BallRegion& U, double p) {
    validate_region(f.chart(), U);
    return lp_distance(apply(M, mask_field(f, U)), mask_field(apply(M, f), U), p);
}

double disjoint_union_check(const OperatorSpec& M, const SampledField& f, const std::vector<BallRegion>& regions,
                            double p) {
    if (regions.empty()) throw Error(ErrorCode::Precondition, "at least one region is required");
    const ChartDomain& chart = f.chart();
    for (const auto& r : regions) validate_region(chart, r);
    for (std::size_t i = 0; i < regions.size(); ++i)
        for (std::size_t j = i + 1; j < regions.size(); ++j)
            if (!(chart.distance(regions[i].center, regions[j].center) > regions[i].radius + regions[j].radius))
                throw Error(ErrorCode::Precondition, "regions overlap; closed balls must be pairwise disjoint");

    SampledField sum = SampledField::zeros(chart, f.kind(), f.interp_order());
    SampledField images = SampledField::zeros(chart, apply(M, sum).kind(), f.interp_order());
    for (const auto& r : regions) {
        const SampledField piece = mask_field(f, r);
        sum = field_axpy(1.0, sum, 1.0, piece);
        images = field_axpy(1.0, images, 1.0, apply(M, piece));
    }
    return lp_distance(apply(M, sum), images, p);
}

namespace {

// Error-free transformation: a + b = s + e exactly.
inline void two_sum(double a, double b, double& s, double& e) {
    s = a + b;
    const double bb = s - a;
    e = (a - (s - bb)) + (b - bb);
}

}  // namespace

double inclusion_exclusion_reconstruct(const OperatorSpec& M, const SampledField& f, const std::vector<BallRegion>& cover,
                                       double p) {
    const std::size_t k = cover.size();
    if (k == 0) throw Error(ErrorCode::Precondition, "cover must not be empty");
    if (k > 12) throw Error(ErrorCode::Precondition, "cover has more than 12 balls (2^n terms)");
    const ChartDomain& chart = f.chart();
    for (const auto& r : cover) validate_region(chart, r);
    const std::size_t n = chart.node_count();

    std::vector<std::vector<char>> member(k);
    for (std::size_t i = 0; i < k; ++i) member[i] = ball_nodes(chart, cover[i]);
    const int nc = f.components();
    for (std::size_t node = 0; node < n; ++node) {
        bool nonzero = false;
        for (int c = 0; c < nc; ++c) nonzero = nonzero || f.values()[node * nc + c] != 0.0;
        if (!nonzero) continue;
        bool hit = false;
        for (std::size_t i = 0; i < k && !hit; ++i) hit = member[i][node];
        if (!hit) throw Error(ErrorCode::Precondition, "cover misses part of the support of f");
    }

    const SampledField Mf = apply(M, f);
    const int mc = Mf.components();
    std::vector<double> hi(n * mc, 0.0), lo(n * mc, 0.0);
    auto accumulate = [&](const SampledField& term, double sign) {
        const auto v = term.values();
        for (std::size_t i = 0; i < v.size(); ++i) {
            double s, e;
            two_sum(hi[i], sign * v[i], s, e);
            hi[i] = s;
            lo[i] += e;
        }
    };

    // Subsets whose node intersection is empty contribute M(0); count their
    // signs and add that image once.
    int empty_sign = 0;
    std::vector<char> keep(n);
    for (std::size_t mask = 1; mask < (std::size_t(1) << k); ++mask) {
        const int size = std::popcount(mask);
        const double sign = (size % 2 == 1) ? 1.0 : -1.0;
        bool any = false;
        for (std::size_t node = 0; node < n; ++node) {
            char in = 1;
            for (std::size_t i = 0; i < k && in; ++i)
                if (mask & (std::size_t(1) << i)) in = member[i][node];
            keep[node] = in;
            any = any || in;
        }
        if (!any) {
            empty_sign += size % 2 == 1 ? 1 : -1;
            continue;
        }
        accumulate(apply(M, mask_nodes(f, keep)), sign);
    }
    if (empty_sign != 0) {
        const SampledField zero_image = m_zero_image(M, chart, f.kind());
        for (int j = 0; j < std::abs(empty_sign); ++j) accumulate(zero_image, empty_sign > 0 ? 1.0 : -1.0);
    }
    std::vector<double> total(n * mc);
    for (std::size_t i = 0; i < total.size(); ++i) total[i] = hi[i] + lo[i];
    const SampledField recon(chart, Mf.kind(), std::move(total), f.interp_order());
    return lp_distance(recon, Mf, p);
}

// ------------------------------------------------------------------ Vitali

double high_frequency_energy(const SampledField& f) {
    const ChartDomain& chart = f.chart();
    const int d = chart.dim();
    std::vector<int> dims(d);
    for (int a = 0; a < d; ++a) dims[a] = chart.resolution(a);
    const int nc = f.components();
    double total = 0.0, high = 0.0;
    const std::size_t n = chart.node_count();
    fftw_complex* buf = fftw_alloc_complex(n);
    fftw_plan plan = fftw_plan_dft(d, dims.data(), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    for (int c = 0; c < nc; ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            buf[i][0] = f.values()[i * nc + c];
            buf[i][1] = 0.0;
        }
        fftw_execute(plan);
        for (std::size_t i = 0; i < n; ++i) {
            const double e = buf[i][0] * buf[i][0] + buf[i][1] * buf[i][1];
            total += e;
            const auto idx = chart.multi_index(i);
            bool is_high = false;
            for (int a = 0; a < d; ++a) {
                const int k = std::min(idx[a], dims[a] - idx[a]);
                is_high = is_high || 4 * k > dims[a];
            }
            if (is_high) high += e;
        }
    }
    fftw_destroy_plan(plan);
    fftw_free(buf);
    return total > 0.0 ? high / total : 0.0;
}

namespace {

struct PackingState {
    std::vector<VitaliPiece> pieces;
    double covered_err = 0.0;    // sum w |f - c|^p over covered nodes
    double uncovered_mass = 0.0;  // sum w |f|^p over uncovered nodes of U
    double error(double p) const { return std::pow(std::max(0.0, covered_err + uncovered_mass), 1.0 / p); }
};

struct Offset {
    std::array<int, 3> step;
    double dist;
};

// Index offsets within `reach` of the origin, nearest first.
std::vector<Offset> sorted_offsets(const ChartDomain& chart, double reach) {
    const int d = chart.dim();
    std::array<int, 3> span{0, 0, 0};
    for (int a = 0; a < d; ++a) span[a] = static_cast<int>(std::ceil(reach / chart.spacing(a)));
    std::vector<Offset> out;
    for (int i = -span[0]; i <= span[0]; ++i)
        for (int j = -span[1]; j <= span[1]; ++j)
            for (int l = -span[2]; l <= span[2]; ++l) {
                const std::array<int, 3> st{i, j, l};
                double r2 = 0.0;
                for (int a = 0; a < d; ++a) r2 += std::pow(st[a] * chart.spacing(a), 2);
                if (r2 <= reach * reach) out.push_back({st, std::sqrt(r2)});
            }
    std::stable_sort(out.begin(), out.end(), [](const Offset& x, const Offset& y) { return x.dist < y.dist; });
    return out;
}

// One greedy pass with a fixed pointwise tolerance. Returns true when the
// measured error drops below eps.
bool greedy_pack(const SampledField& f, const BallRegion& U, double eps, int max_balls, double p, double tol,
                 PackingState& st) {
    const ChartDomain& chart = f.chart();
    const int d = chart.dim();
    const auto vals = f.values();
    const auto w = chart.node_weights();

    std::vector<std::size_t> nodes;
    std::vector<std::int64_t> slot(chart.node_count(), -1);
    for (std::size_t i = 0; i < chart.node_count(); ++i)
        if (U.contains(chart, chart.node(i))) {
            slot[i] = static_cast<std::int64_t>(nodes.size());
            nodes.push_back(i);
        }

    std::vector<std::array<int, 3>> index(nodes.size());
    std::vector<double> clearance(nodes.size());
    std::vector<char> covered(nodes.size(), 0);
    st = PackingState{};
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        index[k] = chart.multi_index(nodes[k]);
        clearance[k] = U.radius - chart.distance(U.center, chart.node(nodes[k]));
        st.uncovered_mass += w[nodes[k]] * std::pow(std::abs(vals[nodes[k]]), p);
    }
    const double target = std::pow(eps, p);
    if (st.covered_err + st.uncovered_mass < target) return true;

    const std::vector<Offset> offsets = sorted_offsets(chart, 2.0 * U.radius);
    // Slot of node k shifted by an offset, or -1 outside U.
    auto shifted = [&](std::size_t k, const Offset& o) -> std::int64_t {
        std::array<int, 3> idx{};
        for (int a = 0; a < 3; ++a) idx[a] = index[k][a] + o.step[a];
        for (int a = 0; a < d; ++a) {
            const int n = chart.resolution(a);
            if (chart.periodic()) idx[a] = ((idx[a] % n) + n) % n;
            else if (idx[a] < 0 || idx[a] >= n) return -1;
        }
        return slot[chart.flat_index(idx)];
    };

    // Largest radius for a ball centred at node k whose mean |f - f(k)|^p
    // over the covered nodes stays within tol^p; the covered error is then
    // at most tol^p |U| no matter how the balls are arranged.
    const double budget = std::pow(tol, p);
    std::vector<double> tol_radius(nodes.size());
    parallel_for(nodes.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            const double c = vals[nodes[k]];
            double r = clearance[k], err = 0.0, mass = 0.0;
            for (const Offset& o : offsets) {
                if (o.dist >= clearance[k]) break;
                const std::int64_t s = shifted(k, o);
                if (s < 0) continue;
                const double wn = w[nodes[s]];
                err += wn * std::pow(std::abs(vals[nodes[s]] - c), p);
                mass += wn;
                if (err > budget * mass) {
                    r = o.dist;
                    break;
                }
            }
            tol_radius[k] = r;
        }
    });

    // No ball can be wider than this, which bounds the clearance updates.
    double widest = 0.0;
    for (double r : tol_radius) widest = std::max(widest, r);

    // Error removed by the largest admissible ball at node k.
    auto gain = [&](std::size_t k) {
        const double radius = std::min(clearance[k], tol_radius[k]);
        const double c = vals[nodes[k]];
        double g = 0.0;
        for (const Offset& o : offsets) {
            if (o.dist >= radius) break;
            const std::int64_t s = shifted(k, o);
            if (s < 0) continue;
            const double fv = vals[nodes[s]];
            g += w[nodes[s]] * (std::pow(std::abs(fv), p) - std::pow(std::abs(fv - c), p));
        }
        return g;
    };
    // Gains only fall as balls are placed, so a popped entry whose recomputed
    // gain still matches is the true maximum.
    using Entry = std::pair<double, std::size_t>;
    std::priority_queue<Entry> heap;
    for (std::size_t k = 0; k < nodes.size(); ++k)
        if (clearance[k] > 0.0) heap.emplace(gain(k), nodes.size() - k);
    while (!heap.empty()) {
        const auto [stored, tag] = heap.top();
        heap.pop();
        const std::size_t k = nodes.size() - tag;
        if (covered[k] || clearance[k] <= 0.0) continue;
        const double now = gain(k);
        if (now < stored) {
            heap.emplace(now, tag);
            continue;
        }
        const double radius = std::min(clearance[k], tol_radius[k]);
        if (static_cast<int>(st.pieces.size()) >= max_balls) return false;
        // The covered node set only changes at node distances, so shrink the
        // ball to just past its farthest node; neighbours get the room.
        double reach = 0.0;
        for (const Offset& o : offsets) {
            if (o.dist >= radius) break;
            if (shifted(k, o) >= 0) reach = o.dist;
        }
        const double tight = reach > 0.0 ? std::min(radius, reach * (1.0 + 1e-9)) : 0.5 * radius;
        const double c = vals[nodes[k]];
        st.pieces.push_back({BallRegion{chart.node(nodes[k]), tight}, c});
        for (const Offset& o : offsets) {
            if (o.dist >= tight + widest) break;
            const std::int64_t s = shifted(k, o);
            if (s < 0) continue;
            if (o.dist < tight) {
                const double fv = vals[nodes[s]];
                st.uncovered_mass -= w[nodes[s]] * std::pow(std::abs(fv), p);
                st.covered_err += w[nodes[s]] * std::pow(std::abs(fv - c), p);
                covered[s] = 1;
            }
            clearance[s] = std::min(clearance[s], o.dist - tight);
        }
        if (st.covered_err + st.uncovered_mass < target) return true;
    }
    return st.covered_err + st.uncovered_mass < target;
}

}  // namespace

VitaliResult vitali_approximate(const SampledField& f, const BallRegion& U, double eps, int max_balls, double p) {
    if (f.kind() != FieldKind::Scalar) throw Error(ErrorCode::KindMismatch, "Vitali approximation needs a scalar field");
    if (!(eps > 0.0)) throw Error(ErrorCode::Precondition, "eps must be positive");
    if (max_balls < 0) throw Error(ErrorCode::Precondition, "max_balls must be non-negative");
    validate_region(f.chart(), U);
    if (high_frequency_energy(f) >= 0.01)
        throw Error(ErrorCode::Precondition, "field is not smooth enough: >= 1% of its energy lies above half-Nyquist");

    const double volume = std::pow(U.radius, f.chart().dim()) *
                          (f.chart().dim() == 1 ? 2.0 : f.chart().dim() == 2 ? std::numbers::pi : 4.0 * std::numbers::pi / 3.0);
    double best = std::numeric_limits<double>::infinity();
    // Looser tolerances give fewer, larger balls but a larger in-ball error;
    // try the strict ones first.
    for (double frac : {0.3, 0.5, 0.7, 0.85}) {
        const double tol = frac * eps / std::pow(volume, 1.0 / p);
        PackingState st;
        const bool ok = greedy_pack(f, U, eps, max_balls, p, tol, st);
        best = std::min(best, st.error(p));
        if (ok) return VitaliResult{std::move(st.pieces), st.error(p), tol};
    }
    std::ostringstream os;
    os << "no packing within " << max_balls << " balls reached error " << eps << " (best " << best << ")";
    throw BudgetExhausted(os.str(), best);
}

// -------------------------------------------------------- rotation fitting

Mat random_orthogonal(int d, std::uint64_t seed, bool proper_only) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Mat A(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) A(i, j) = gauss(rng);
    Eigen::HouseholderQR<Mat> qr(A);
    Mat Q = qr.householderQ() * Mat::Identity(d, d);
    const Mat R = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < d; ++j)
        if (R(j, j) < 0.0) Q.col(j) = -Q.col(j);
    if (proper_only && Q.determinant() < 0.0) Q.col(0) = -Q.col(0);
    return Q;
}

RotationFit rotation_invariance_fit(const SampledField& F, const BallRegion& ball, int w_samples, bool proper_only,
                                    int bins, std::uint64_t seed) {
    if (F.kind() != FieldKind::Vector) throw Error(ErrorCode::KindMismatch, "rotation fit needs a vector field");
    const ChartDomain& chart = F.chart();
    const int d = chart.dim();
    if (d < 2) throw Error(ErrorCode::Precondition, "rotation fit needs d >= 2");
    validate_region(chart, ball);

    std::vector<std::size_t> nodes;
    for (std::size_t i = 0; i < chart.node_count(); ++i)
        if (ball.contains(chart, chart.node(i))) nodes.push_back(i);

    RotationFit fit;
    std::mt19937_64 rng(seed);
    for (int s = 0; s < w_samples; ++s) {
        const Mat W = random_orthogonal(d, rng(), proper_only);
        std::vector<double> worst(nodes.size(), 0.0);
        parallel_for(nodes.size(), [&](std::size_t begin, std::size_t end) {
            for (std::size_t k = begin; k < end; ++k) {
                const Vec x = chart.displacement(ball.center, chart.node(nodes[k]));
                const Vec Fx = F.value_at(nodes[k]);
                worst[k] = (F.eval(ball.center + W * x) - W * Fx).norm();
            }
        });
        for (double v : worst) fit.max_violation = std::max(fit.max_violation, v);
    }

    fit.bins.assign(bins, RadialBin{});
    std::vector<double> rsum(bins, 0.0), lsum(bins, 0.0);
    for (std::size_t i : nodes) {
        const Vec x = chart.displacement(ball.center, chart.node(i));
        const double r = x.norm();
        if (r == 0.0) continue;
        const Vec Fx = F.value_at(i);
        const double lambda = Fx.dot(x) / (r * r);
        fit.orthogonal_residual = std::max(fit.orthogonal_residual, (Fx - lambda * x).norm());
        const int b = std::min(bins - 1, static_cast<int>(r / ball.radius * bins));
        rsum[b] += r;
        lsum[b] += lambda;
        ++fit.bins[b].count;
    }
    for (int b = 0; b < bins; ++b) {
        if (fit.bins[b].count < 20) {
            std::ostringstream os;
            os << "radial bin " << b << " holds " << fit.bins[b].count << " nodes (< 20); refine the grid";
            throw Error(ErrorCode::UnderResolution, os.str());
        }
        fit.bins[b].mean_radius = rsum[b] / fit.bins[b].count;
        fit.bins[b].lambda = lsum[b] / fit.bins[b].count;
    }
    return fit;
}

// --------------------------------------------------------- constant image

double constant_image_check(const OperatorSpec& M, double c, const BallRegion& U, int transports,
                            const ChartDomain& chart, std::uint64_t seed) {
    validate_region(chart, U);
    const auto inside = ball_nodes(chart, U);
    std::vector<double> v(chart.node_count(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i)
        if (inside[i]) v[i] = c;
    const SampledField g = apply(M, SampledField(chart, FieldKind::Scalar, std::move(v)));
    if (g.kind() != FieldKind::Scalar) throw Error(ErrorCode::KindMismatch, "constant-image check needs a scalar operator");

    const double h = chart.max_spacing();
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    std::vector<std::size_t> deep;
    for (std::size_t i = 0; i < chart.node_count(); ++i) {
        const double dist = chart.distance(U.center, chart.node(i));
        if (dist < U.radius - h) {
            lo = std::min(lo, g.scalar_at(i));
            hi = std::max(hi, g.scalar_at(i));
        }
        if (dist < 0.5 * U.radius) deep.push_back(i);
    }
    double deviation = hi >= lo ? hi - lo : 0.0;

    // A transport supported in U fixes c 1_U, so an equivariant image must
    // take the same value at both ends.
    std::mt19937_64 rng(seed);
    for (int t = 0; t < transports && deep.size() >= 2; ++t) {
        std::uniform_int_distribution<std::size_t> pick(0, deep.size() - 1);
        const std::size_t a = deep[pick(rng)];
        const std::size_t b = deep[pick(rng)];
        const Diffeo phi = make_point_transport(chart, chart.node(a), chart.node(b), U);
        deviation = std::max(deviation, std::abs(g.eval_scalar(phi.forward(chart.node(a))) - g.scalar_at(a)));
    }
    return deviation;
}

// ---------------------------------------------------------------- flowbox

double flowbox_residual(const Diffeo& phi, const SampledField& f, const Vec& m, double radius) {
    const ChartDomain& chart = f.chart();
    const double a = flowbox_speed(f, m);
    const BallRegion ball{m, radius};
    std::vector<double> contrib(chart.node_count(), 0.0);
    parallel_for(chart.node_count(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const Vec u = chart.node(i);
            if (!ball.contains(chart, u)) continue;
            Vec r = pullback_vector_at(phi, f, u);
            r(0) -= a;
            contrib[i] = chart.weight(i) * r.squaredNorm();
        }
    });
    double sum = 0.0;
    for (double c : contrib) sum += c;
    return std::sqrt(sum);
}

std::vector<double> observed_orders(const std::vector<double>& errors) {
    std::vector<double> out;
    for (std::size_t i = 0; i + 1 < errors.size(); ++i) out.push_back(std::log2(errors[i] / errors[i + 1]));
    return out;
}

}  // namespace diffeolab
