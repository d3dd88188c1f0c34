#include "diffeolab/runner.hpp"

#include "diffeolab/parallel.hpp"

#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

namespace diffeolab {

namespace {

std::ofstream open_output(const RunOptions& o, const std::string& name) {
    std::filesystem::create_directories(o.out_dir);
    std::ofstream out(o.out_dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Serialization, "cannot write " + (o.out_dir / name).string());
    return out;
}

void say(const RunOptions& o, const std::string& text) {
    if (o.console) *o.console << text << std::flush;
}

void trace(std::ostream* log, const std::string& text) {
    if (log) *log << text << '\n' << std::flush;
}

void trace(const RunOptions& o, const std::string& text) {
    if (o.verbose) trace(o.log, text);
}

std::string printf_string(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
std::string printf_string(const char* fmt, ...) {
    char buf[512];
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(buf, sizeof buf, fmt, args);
    va_end(args);
    return buf;
}

/// Point at fractional position `frac` of the chart extent, per axis.
Vec at(const ChartDomain& chart, std::initializer_list<double> frac) {
    Vec v(chart.dim());
    auto it = frac.begin();
    for (int a = 0; a < chart.dim(); ++a) {
        const double f = it != frac.end() ? *it++ : 0.5;
        v(a) = chart.lower(a) + f * chart.length(a);
    }
    return v;
}

double min_length(const ChartDomain& chart) {
    double m = chart.length(0);
    for (int a = 1; a < chart.dim(); ++a) m = std::min(m, chart.length(a));
    return m;
}

BallRegion ball_at(const ChartDomain& chart, std::initializer_list<double> frac, double radius_frac) {
    return BallRegion{at(chart, frac), radius_frac * min_length(chart)};
}

std::vector<FieldFactory> fields_of_kind(const ExperimentConfig& c, FieldKind kind) {
    std::vector<FieldFactory> out;
    for (const auto& f : c.fields)
        if (f.kind == kind) out.push_back(f.factory());
    return out;
}

std::vector<DiffeoFactory> diffeo_bank(const ExperimentConfig& c) {
    std::vector<DiffeoFactory> out;
    for (const auto& d : c.diffeos) out.push_back(d.factory());
    return out;
}

std::vector<ChartDomain> level_charts(const ExperimentConfig& c) {
    std::vector<ChartDomain> out;
    for (int n : c.levels) out.push_back(c.chart.with_resolution(n));
    return out;
}

const OperatorSpec& pointwise_op(const char* rho) {
    static const OperatorSpec relu = OperatorSpec::pointwise("relu"), tanh_ = OperatorSpec::pointwise("tanh"),
                              abs_ = OperatorSpec::pointwise("abs");
    const std::string r = rho;
    return r == "relu" ? relu : r == "tanh" ? tanh_ : abs_;
}

// ------------------------------------------------------------------ decay

struct DecayRow {
    int dim;
    double p;
    int n;
    double norm, bound, baseline, fitted_rate;
    int exponent;
};

std::vector<DecayRow> decay_rows(const DecaySettings& s, std::ostream* log) {
    std::vector<DecayRow> rows;
    const double dir[3] = {1.0, 0.5, 0.25};
    for (int d : s.dims) {
        if (d < 1 || d > 3) throw Error(ErrorCode::Config, "decay dims must be 1, 2 or 3");
        const ChartDomain chart = ChartDomain::unit_torus(d, s.resolution);
        const Vec center = Vec::Constant(d, 0.5);
        Vec direction(d);
        for (int a = 0; a < d; ++a) direction(a) = dir[a];
        const SampledField f = make_vector_bump(chart, center, s.bump_radius, direction);
        for (double p : s.p_values) {
            const DecayCurve curve = contraction_decay_test(f, center, s.n_values, p, s.scale, s.eps);
            for (std::size_t i = 0; i < curve.n_values.size(); ++i)
                rows.push_back({d, p, curve.n_values[i], curve.norms[i], curve.bounds[i], curve.baseline,
                                curve.fitted_rate, curve.bound_exponent});
            trace(log, printf_string("decay d=%d p=%g fitted rate %.4f", d, p, curve.fitted_rate));
        }
    }
    return rows;
}

// ------------------------------------------------------------- norm bound

struct NormRow {
    std::string diffeo;
    NormEstimate est;
};

std::vector<NormRow> norm_rows(const ExperimentConfig& c, std::ostream* log) {
    std::vector<NormRow> rows;
    for (const auto& d : c.diffeos) {
        const Diffeo phi = diffeo_from_record(d.record, c.chart);
        rows.push_back({d.label, operator_norm_estimate(phi, c.norm_bound.trials, c.norm_bound.p, FieldKind::Vector,
                                                        c.seed)});
        trace(log, printf_string("norm-bound %s estimate %.4f bound %.4f", d.label.c_str(), rows.back().est.estimate,
                                 rows.back().est.analytic_bound));
    }
    return rows;
}

bool norm_row_ok(const NormRow& r, double slack) {
    return std::isnan(r.est.analytic_bound) || r.est.estimate <= r.est.analytic_bound * slack;
}

// ----------------------------------------------------------------- vitali

struct VitaliOutcome {
    std::vector<VitaliPiece> pieces;
    double achieved = 0.0;
    double baseline = 0.0;
    double target = 0.0;
    double tolerance = std::numeric_limits<double>::quiet_NaN();
    bool ok = false;
};

VitaliOutcome vitali_outcome(const ExperimentConfig& c) {
    const VitaliSettings& s = c.vitali;
    const FieldSpec* spec = nullptr;
    for (const auto& f : c.fields)
        if (f.label == s.field) spec = &f;
    if (!spec) throw Error(ErrorCode::Config, "vitali field '" + s.field + "' is not in the field bank");
    const ChartDomain chart = c.chart.with_resolution(s.resolution);
    const SampledField f = spec->make(chart);
    VitaliOutcome out;
    out.baseline = lp_norm(mask_field(f, s.region), s.p);
    out.target = s.eps_fraction * out.baseline;
    try {
        const VitaliResult r = vitali_approximate(f, s.region, out.target, s.max_balls, s.p);
        out.pieces = r.pieces;
        out.achieved = r.achieved_error;
        out.tolerance = r.local_tolerance;
        out.ok = out.achieved < out.target;
    } catch (const BudgetExhausted& e) {
        out.achieved = e.best();
        out.ok = false;
    }
    return out;
}

// -------------------------------------------------------------------- zoo

struct ZooRow {
    std::string demo, quantity;
    double value;
    std::string expectation;
    bool pass;
};

std::vector<ZooRow> zoo_rows(const ExperimentConfig& c, std::ostream* log) {
    std::vector<ZooRow> rows;
    const ChartDomain& chart = c.chart;
    const auto scalar_fields = fields_of_kind(c, FieldKind::Scalar);
    const OperatorSpec sup = OperatorSpec::sup();

    // Translations by whole cells map nodes onto nodes, so the sup commutes
    // with them exactly.
    if (chart.periodic()) {
        double worst = 0.0;
        for (int k : {1, 7, 32}) {
            Vec shift(chart.dim());
            for (int a = 0; a < chart.dim(); ++a) shift(a) = (k + a) * chart.spacing(a);
            const Diffeo phi = make_translation(chart, shift);
            for (const auto& ff : scalar_fields)
                worst = std::max(worst, equivariance_defect(sup, phi, ff.make(chart), 2.0, ff.label).defect_rel);
        }
        rows.push_back({"sup", "defect_rel under grid translations", worst, "== 0", worst == 0.0});
    }
    {
        double loc = 0.0;
        for (const auto& ff : scalar_fields)
            loc = std::max(loc, localization_check(sup, ff.make(chart), ball_at(chart, {0.45, 0.5}, 0.08), 2.0));
        rows.push_back({"sup", "mask-commutation defect", loc, "> 0", loc > 0.0});
    }
    {
        const SampledField z = m_zero_image(OperatorSpec::exp_phase(), chart, FieldKind::Scalar);
        double dev = 0.0;
        for (std::size_t i = 0; i < z.node_count(); ++i)
            dev = std::max(dev, (z.value_at(i) - make_vec({1.0, 0.0})).norm());
        rows.push_back({"exp_phase", "max |M(0) - (1,0)|", dev, "== 0", dev == 0.0});
        rows.push_back({"exp_phase", "M(0) is constant", is_constant_field(z) ? 1.0 : 0.0, "== 1", is_constant_field(z)});
    }
    {
        const double lip = lipschitz_estimate(OperatorSpec::sqrt_pointwise(), 2.0, 32, chart, {1e-4, true}, c.seed + 1);
        rows.push_back({"sqrt", "Lipschitz estimate near 0", lip, "> 10", lip > 10.0});
    }
    for (const char* rho : {"relu", "tanh", "abs"}) {
        const OperatorSpec& M = pointwise_op(rho);
        const double lip = lipschitz_estimate(M, 2.0, 32, chart, {}, c.seed + 1);
        const double L = scalar_function(rho).lipschitz;
        rows.push_back({M.label, "Lipschitz estimate", lip, "<= " + format_double(L), lip <= L * (1.0 + 1e-12)});
    }
    for (const auto& r : rows)
        trace(log, printf_string("zoo %s %s = %.6g (%s)", r.demo.c_str(), r.quantity.c_str(), r.value,
                                 r.pass ? "ok" : "FAIL"));
    return rows;
}

// ----------------------------------------------------------------- suite

ScoreRow row_decay(const ExperimentConfig& c, std::ostream* log) {
    ScoreRow row{"contraction-decay", 0.0, c.decay.slack, false, ""};
    for (const auto& r : decay_rows(c.decay, log)) row.value = std::max(row.value, r.norm / r.bound);
    row.pass = row.value <= row.threshold;
    row.note = "max |L(1_B f)|^p / bound over d, p, n";
    return row;
}

std::vector<SampledField> scalar_test_fields(const ExperimentConfig& c) {
    std::vector<SampledField> out;
    for (const auto& ff : fields_of_kind(c, FieldKind::Scalar)) out.push_back(ff.make(c.chart));
    return out;
}

ScoreRow row_localization(const ExperimentConfig& c, const std::vector<SampledField>& fields) {
    ScoreRow row{"localization", 0.0, 0.0, false, ""};
    const ChartDomain& ch = c.chart;
    const std::vector<BallRegion> regions{ball_at(ch, {0.5, 0.5}, 0.15), ball_at(ch, {0.4, 0.45}, 0.1),
                                          ball_at(ch, {0.62, 0.52}, 0.07)};
    for (const char* rho : {"relu", "tanh", "abs"})
        for (const auto& f : fields)
            for (const auto& U : regions) row.value = std::max(row.value, localization_check(pointwise_op(rho), f, U, 2.0));
    double blur = 0.0;
    for (const auto& f : fields) blur = std::max(blur, localization_check(OperatorSpec::blur(0.05), f, regions[0], 2.0));
    row.pass = row.value == 0.0 && blur > 0.0;
    row.note = printf_string("pointwise exact; blur probe %.3e", blur);
    return row;
}

ScoreRow row_disjoint(const ExperimentConfig& c, const std::vector<SampledField>& fields) {
    ScoreRow row{"disjoint-union", 0.0, 0.0, false, ""};
    const ChartDomain& ch = c.chart;
    const std::vector<BallRegion> regions{ball_at(ch, {0.3, 0.3}, 0.12), ball_at(ch, {0.65, 0.4}, 0.1),
                                          ball_at(ch, {0.45, 0.7}, 0.12)};
    for (const char* rho : {"relu", "tanh", "abs"})
        for (const auto& f : fields) row.value = std::max(row.value, disjoint_union_check(pointwise_op(rho), f, regions, 2.0));
    bool overlap_rejected = false;
    try {
        disjoint_union_check(pointwise_op("relu"), fields.front(),
                             {ball_at(ch, {0.4, 0.5}, 0.12), ball_at(ch, {0.55, 0.5}, 0.12)}, 2.0);
    } catch (const Error& e) {
        overlap_rejected = e.code() == ErrorCode::Precondition;
    }
    row.pass = row.value == 0.0 && overlap_rejected;
    row.note = overlap_rejected ? "overlapping balls rejected" : "overlapping balls accepted";
    return row;
}

ScoreRow row_inclusion_exclusion(const ExperimentConfig& c, const std::vector<SampledField>& fields) {
    ScoreRow row{"inclusion-exclusion", 0.0, 0.0, false, ""};
    const ChartDomain& ch = c.chart;
    const std::vector<std::vector<BallRegion>> covers{
        {ball_at(ch, {0.4, 0.4}, 0.3), ball_at(ch, {0.6, 0.4}, 0.3), ball_at(ch, {0.4, 0.6}, 0.3),
         ball_at(ch, {0.6, 0.6}, 0.3)},
        {ball_at(ch, {0.42, 0.5}, 0.32), ball_at(ch, {0.58, 0.5}, 0.32)},
        {ball_at(ch, {0.5, 0.38}, 0.3), ball_at(ch, {0.38, 0.6}, 0.3), ball_at(ch, {0.62, 0.6}, 0.3)},
    };
    for (const char* rho : {"relu", "tanh", "abs"})
        for (const auto& f : fields)
            for (const auto& cover : covers)
                row.value = std::max(row.value, inclusion_exclusion_reconstruct(pointwise_op(rho), f, cover, 2.0));
    row.pass = row.value == 0.0;
    row.note = "covers of 2, 3 and 4 balls";
    return row;
}

ScoreRow row_vitali(const ExperimentConfig& c) {
    const VitaliOutcome v = vitali_outcome(c);
    ScoreRow row{"local-vitali", v.achieved / v.baseline, c.vitali.eps_fraction, v.ok, ""};
    row.note = std::to_string(v.pieces.size()) + " balls (max " + std::to_string(c.vitali.max_balls) + ")";
    return row;
}

// F(x) = |x| x on a box, plus a counterexample with a rotational part that
// only a reflection can expose.
ScoreRow row_rotation(const ExperimentConfig& c) {
    const int n = c.chart.resolution(0);
    const ChartDomain box = ChartDomain::box({-1.0, -1.0}, {1.0, 1.0}, {n, n});
    const BallRegion ball{make_vec({0.0, 0.0}), 0.9};
    const SampledField F = SampledField::vector(box, [](const Vec& x) -> Vec { return x.norm() * x; });
    const SampledField G = SampledField::vector(box, [](const Vec& x) -> Vec {
        const double r = x.norm();
        return r * x + 0.5 * r * r * make_vec({-x(1), x(0)});
    });
    const RotationFit fit = rotation_invariance_fit(F, ball, 8, false, 32, c.seed + 2);
    double bin_err = 0.0;
    for (const auto& b : fit.bins) bin_err = std::max(bin_err, std::abs(b.lambda - b.mean_radius));
    const double proper = rotation_invariance_fit(G, ball, 8, true, 32, c.seed + 2).max_violation;
    const double full = rotation_invariance_fit(G, ball, 8, false, 32, c.seed + 2).max_violation;
    ScoreRow row{"rotation-invariance", std::max(bin_err, fit.orthogonal_residual), 1e-3, false, ""};
    const bool detected = full > 1e-2 && full > 100.0 * proper;
    row.pass = row.value <= row.threshold && fit.max_violation <= 1e-3 && detected;
    row.note = printf_string("violation %.2e; rotational part SO %.2e vs O %.2e", fit.max_violation, proper, full);
    return row;
}

ScoreRow row_norm_bound(const ExperimentConfig& c, std::ostream* log) {
    ScoreRow row{"operator-norm-bound", 0.0, c.norm_bound.slack, true, ""};
    for (const auto& r : norm_rows(c, log)) {
        if (!std::isnan(r.est.analytic_bound)) row.value = std::max(row.value, r.est.estimate / r.est.analytic_bound);
        row.pass = row.pass && norm_row_ok(r, c.norm_bound.slack);
    }
    row.note = "max estimate / bound over the diffeo bank";
    return row;
}

ScoreRow row_constant_image(const ExperimentConfig& c) {
    ScoreRow row{"constant-image", 0.0, 0.0, false, ""};
    const BallRegion U = ball_at(c.chart, {0.5, 0.5}, 0.25);
    for (const char* rho : {"relu", "tanh", "abs", "sigmoid", "softplus"})
        for (double value : {1.0, -0.5})
            row.value = std::max(row.value,
                                 constant_image_check(OperatorSpec::pointwise(rho), value, U, 4, c.chart, c.seed + 3));
    const double blur = constant_image_check(OperatorSpec::blur(0.05), 1.0, U, 4, c.chart, c.seed + 3);
    row.pass = row.value == 0.0 && blur > 0.0;
    row.note = printf_string("blur deviation %.3e", blur);
    return row;
}

ScoreRow row_flowbox(const ExperimentConfig& c) {
    const ChartDomain& ch = c.chart;
    const Vec m = at(ch, {0.5, 0.5});
    const SampledField shear = SampledField::vector(ch, [&](const Vec& u) -> Vec {
        Vec v = Vec::Zero(ch.dim());
        v(0) = 1.0;
        if (ch.dim() > 1) v(1) = 0.5 * (u(0) - m(0));
        return v;
    });
    const SampledField curved = SampledField::vector(ch, [&](const Vec& u) -> Vec {
        Vec v = Vec::Zero(ch.dim());
        v(0) = 1.0;
        if (ch.dim() > 1) v(1) = 0.5 * std::sin(2.0 * std::numbers::pi * (u(0) - ch.lower(0)) / ch.length(0));
        return v;
    });
    const double r = 0.2 * min_length(ch);
    auto residual = [&](const SampledField& f, double radius) {
        return flowbox_residual(flowbox_straighten(f, m, radius, 64), f, m, radius);
    };
    const double s1 = residual(shear, r), s2 = residual(shear, 0.5 * r);
    const double c1 = residual(curved, r), c2 = residual(curved, 0.5 * r);
    ScoreRow row{"flowbox", std::max(s1, s2), 1e-3, false, ""};
    const bool shear_halves = s2 <= 0.5 * s1;
    const bool curved_halves = c2 <= 0.5 * c1;
    row.pass = row.value <= row.threshold && shear_halves && curved_halves;
    row.note = printf_string("shear %.2e -> %.2e; curved %.2e -> %.2e", s1, s2, c1, c2);
    return row;
}

std::string verdict_table_line(const std::string& op, const std::string& kind, double p, const std::string& expected,
                               const std::string& verdict, bool match, const std::string& extra) {
    return printf_string("%-24s %-7s %-5s %-11s %-11s %-5s %s\n", op.c_str(), kind.c_str(), format_double(p).c_str(),
                         expected.c_str(), verdict.c_str(), match ? "ok" : "FAIL", extra.c_str());
}

}  // namespace

// --------------------------------------------------------------- commands

int run_defect(const ExperimentConfig& c, const RunOptions& o) {
    const auto diffeos = diffeo_bank(c);
    std::ofstream jsonl = open_output(o, c.outputs.reports);
    std::ofstream csv = open_output(o, c.outputs.summary);
    std::ofstream table = open_output(o, c.outputs.verdicts);
    csv << report_csv_header() << '\n';
    std::string text = printf_string("%-24s %-7s %-5s %-11s %-11s %-5s %s\n", "operator", "fields", "p", "expected",
                                     "verdict", "match", "detail");

    bool all_match = true;
    for (const auto& e : c.operators) {
        const FieldKind kind = e.suite_kind();
        const auto fields = fields_of_kind(c, kind);
        if (fields.empty()) throw Error(ErrorCode::Config, "no " + std::string(to_string(kind)) + " fields for " + e.op.label);
        for (double p : c.p_values) {
            SuiteSettings s;
            s.levels = level_charts(c);
            s.p = p;
            s.budget = c.budget;
            s.baseline_factor = c.baseline_factor;
            s.noise_floor = c.noise_floor;
            trace(o, "defect " + e.op.label + " p=" + format_double(p));
            const SuiteResult r = kind == FieldKind::Scalar ? falsification_suite_scalar(e.op, diffeos, fields, s)
                                                            : falsification_suite_vector(e.op, diffeos, fields, s);
            const std::string verdict = to_string(r.verdict);
            for (const auto& rep : r.reports) {
                jsonl << report_to_json(rep, verdict).dump() << '\n';
                csv << report_csv_row(rep, verdict) << '\n';
            }
            const bool match = r.verdict == e.expected_verdict();
            all_match = all_match && match;
            std::string detail;
            if (r.witness) {
                detail = "witness " + r.witness->diffeo_label + "/" + r.witness->field_label + "@" +
                         grid_string(r.witness->grid) + " rel " + printf_string("%.4g", r.witness->defect_rel);
            } else {
                double worst = 0.0;
                for (const auto& rep : r.reports) worst = std::max(worst, rep.defect_rel);
                detail = "max rel " + printf_string("%.3g", worst);
            }
            if (kind == FieldKind::Vector) detail += printf_string("; lambda %.10g residual %.3g", r.fitted_lambda, r.fit_residual);
            if (!r.locality_ok) detail += "; fails mask-commutation probe";
            text += verdict_table_line(e.op.label, to_string(kind), p, to_string(e.expected_verdict()), verdict, match,
                                       detail);
        }
    }
    table << text;
    say(o, text);
    return all_match ? kExitOk : kExitFailure;
}

int run_decay(const ExperimentConfig& c, const RunOptions& o) {
    const auto rows = decay_rows(c.decay, o.verbose ? o.log : nullptr);
    std::ofstream csv = open_output(o, c.outputs.decay);
    csv << "dim,p,n,norm,bound,ratio,baseline,bound_exponent,fitted_rate,pass\n";
    bool ok = true;
    for (const auto& r : rows) {
        const bool pass = r.norm <= r.bound * c.decay.slack;
        ok = ok && pass;
        csv << r.dim << ',' << format_double(r.p) << ',' << r.n << ',' << format_double(r.norm) << ','
            << format_double(r.bound) << ',' << format_double(r.norm / r.bound) << ',' << format_double(r.baseline) << ','
            << r.exponent << ',' << format_double(r.fitted_rate) << ',' << (pass ? "true" : "false") << '\n';
    }
    say(o, printf_string("decay: %zu rows, %s\n", rows.size(), ok ? "all within bound" : "bound violated"));
    return ok ? kExitOk : kExitFailure;
}

int run_norm_bound(const ExperimentConfig& c, const RunOptions& o) {
    const auto rows = norm_rows(c, o.verbose ? o.log : nullptr);
    std::ofstream csv = open_output(o, c.outputs.norm_bound);
    csv << "diffeo,sup_inverse_jacobian,estimate,analytic_bound,ratio,trials,pass\n";
    bool ok = true;
    for (const auto& r : rows) {
        const bool pass = norm_row_ok(r, c.norm_bound.slack);
        ok = ok && pass;
        csv << r.diffeo << ',' << format_double(r.est.sup_inverse_jacobian) << ',' << format_double(r.est.estimate) << ','
            << format_double(r.est.analytic_bound) << ',' << format_double(r.est.estimate / r.est.analytic_bound) << ','
            << r.est.trials << ',' << (pass ? "true" : "false") << '\n';
    }
    say(o, printf_string("norm-bound: %zu diffeos, %s\n", rows.size(), ok ? "all within bound" : "bound violated"));
    return ok ? kExitOk : kExitFailure;
}

int run_vitali(const ExperimentConfig& c, const RunOptions& o) {
    const VitaliOutcome v = vitali_outcome(c);
    std::ofstream pieces = open_output(o, c.outputs.vitali);
    const int d = c.chart.dim();
    for (int a = 0; a < d; ++a) pieces << (a ? "," : "") << "center_" << a;
    pieces << ",radius,value\n";
    for (const auto& piece : v.pieces) {
        for (int a = 0; a < d; ++a) pieces << (a ? "," : "") << format_double(piece.ball.center(a));
        pieces << ',' << format_double(piece.ball.radius) << ',' << format_double(piece.value) << '\n';
    }
    std::ofstream summary = open_output(o, c.outputs.vitali_summary);
    summary << "field,resolution,balls,max_balls,achieved_error,target,relative_error,local_tolerance,pass\n";
    summary << c.vitali.field << ',' << c.vitali.resolution << ',' << v.pieces.size() << ',' << c.vitali.max_balls << ','
            << format_double(v.achieved) << ',' << format_double(v.target) << ','
            << format_double(v.achieved / v.baseline) << ',' << format_double(v.tolerance) << ','
            << (v.ok ? "true" : "false") << '\n';
    say(o, printf_string("vitali: %zu balls, error %.4g of target %.4g, %s\n", v.pieces.size(), v.achieved, v.target,
                         v.ok ? "ok" : "budget exhausted"));
    return v.ok ? kExitOk : kExitFailure;
}

int run_zoo(const ExperimentConfig& c, const RunOptions& o) {
    const auto rows = zoo_rows(c, o.verbose ? o.log : nullptr);
    std::ofstream csv = open_output(o, c.outputs.zoo);
    csv << "operator,quantity,value,expectation,pass\n";
    bool ok = true;
    std::string text;
    for (const auto& r : rows) {
        ok = ok && r.pass;
        csv << r.demo << ',' << r.quantity << ',' << format_double(r.value) << ',' << r.expectation << ','
            << (r.pass ? "true" : "false") << '\n';
        text += printf_string("%-18s %-36s %-12.6g %-8s %s\n", r.demo.c_str(), r.quantity.c_str(), r.value,
                              r.expectation.c_str(), r.pass ? "ok" : "FAIL");
    }
    say(o, text);
    return ok ? kExitOk : kExitFailure;
}

std::vector<ScoreRow> suite_rows(const ExperimentConfig& c, std::ostream* log) {
    const auto fields = scalar_test_fields(c);
    if (fields.empty()) throw Error(ErrorCode::Config, "the suite needs at least one scalar field");
    std::vector<ScoreRow> rows;
    auto add = [&](ScoreRow r) {
        trace(log, printf_string("suite %s %.6g (%s) %s", r.key.c_str(), r.value, r.pass ? "pass" : "FAIL", r.note.c_str()));
        rows.push_back(std::move(r));
    };
    add(row_decay(c, log));
    add(row_localization(c, fields));
    add(row_disjoint(c, fields));
    add(row_inclusion_exclusion(c, fields));
    add(row_vitali(c));
    add(row_rotation(c));
    add(row_norm_bound(c, log));
    add(row_constant_image(c));
    add(row_flowbox(c));
    return rows;
}

std::string format_scoreboard(const std::vector<ScoreRow>& rows) {
    std::string out = printf_string("%-22s %-13s %-10s %-6s %s\n", "check", "value", "threshold", "status", "note");
    int passed = 0;
    for (const auto& r : rows) {
        passed += r.pass;
        out += printf_string("%-22s %-13.6g %-10.3g %-6s %s\n", r.key.c_str(), r.value, r.threshold,
                             r.pass ? "pass" : "FAIL", r.note.c_str());
    }
    out += printf_string("%d/%zu checks pass\n", passed, rows.size());
    return out;
}

int run_suite(const ExperimentConfig& c, const RunOptions& o) {
    const auto rows = suite_rows(c, o.verbose ? o.log : nullptr);
    std::ofstream csv = open_output(o, c.outputs.suite);
    csv << "check,value,threshold,pass,note\n";
    bool ok = true;
    for (const auto& r : rows) {
        ok = ok && r.pass;
        csv << r.key << ',' << format_double(r.value) << ',' << format_double(r.threshold) << ','
            << (r.pass ? "true" : "false") << ",\"" << r.note << "\"\n";
    }
    const std::string board = format_scoreboard(rows);
    open_output(o, c.outputs.scoreboard) << board;
    say(o, board);
    return ok ? kExitOk : kExitFailure;
}

int run_command(const std::string& command, const std::filesystem::path& config_path, const RunOptions& o) {
    std::ostream& err = o.log ? *o.log : std::cerr;
    ExperimentConfig config;
    try {
        if (!config_path.empty()) config = load_config(config_path);
    } catch (const std::exception& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
    try {
        if (command == "defect") return run_defect(config, o);
        if (command == "decay") return run_decay(config, o);
        if (command == "norm-bound") return run_norm_bound(config, o);
        if (command == "vitali") return run_vitali(config, o);
        if (command == "zoo") return run_zoo(config, o);
        if (command == "suite") return run_suite(config, o);
        err << "unknown command '" << command << "'\n";
        return kExitConfig;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        if (e.code() == ErrorCode::UnderResolution) return kExitUnderResolution;
        if (e.code() == ErrorCode::Config) return kExitConfig;
        return kExitFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

}  // namespace diffeolab
