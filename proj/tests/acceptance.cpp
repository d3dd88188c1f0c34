// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "diffeolab/bank.hpp"
#include "diffeolab/parallel.hpp"
#include "diffeolab/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>

using namespace diffeolab;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::vector<ChartDomain> ladder() { return {standard_chart(128), standard_chart(256), standard_chart(512)}; }

SuiteSettings ladder_settings() {
    SuiteSettings s;
    s.levels = ladder();
    return s;
}

// Errors at the three ladder levels for every (diffeo, field) combination.
std::vector<std::array<const DefectReport*, 3>> by_combo(const SuiteResult& r) {
    std::vector<std::array<const DefectReport*, 3>> out;
    for (std::size_t i = 0; i + 2 < r.reports.size(); i += 3)
        out.push_back({&r.reports[i], &r.reports[i + 1], &r.reports[i + 2]});
    return out;
}

// Order is undefined when the error is already at rounding level.
constexpr double kRoundoff = 1e-12;

Outcome contraction_decay() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    for (int d : {1, 2}) {
        const ChartDomain chart = ChartDomain::unit_torus(d, 512);
        const Vec ctr = Vec::Constant(d, 0.5);
        const Vec dir = d == 1 ? make_vec({1.0}) : make_vec({1.0, 0.5});
        const SampledField f = make_vector_bump(chart, ctr, 0.25, dir);
        for (double p : {1.0, 2.0}) {
            const DecayCurve c = contraction_decay_test(f, ctr, {2, 4, 8}, p, 0.3, 0.5);
            if (c.bound_exponent != d + 1) return {false, "bound exponent is not d + 1"};
            for (std::size_t i = 0; i < c.norms.size(); ++i) worst = std::max(worst, c.norms[i] / c.bounds[i]);
        }
    }
    const double t = seconds_since(t0);
    return {worst <= 1.05 && t < 60.0, "max norm/bound " + fmt("%.5f", worst) + " (limit 1.05), " + fmt("%.1f s", t)};
}

Outcome pointwise_forward() {
    double worst256 = 0.0, min_order = 1e9;
    for (const char* rho : {"relu", "tanh", "abs"}) {
        const SuiteResult r = falsification_suite_scalar(OperatorSpec::pointwise(rho), standard_diffeo_bank(),
                                                         standard_scalar_fields(), ladder_settings());
        if (r.verdict != Verdict::Consistent) return {false, std::string(rho) + " was falsified"};
        for (const auto& lv : by_combo(r)) {
            worst256 = std::max(worst256, lv[1]->defect_rel);
            if (lv[2]->defect_rel <= kRoundoff) continue;
            min_order = std::min({min_order, std::log2(lv[0]->defect_rel / lv[1]->defect_rel),
                                  std::log2(lv[1]->defect_rel / lv[2]->defect_rel)});
        }
    }
    return {worst256 <= 5e-3 && min_order >= 2.0,
            "max defect_rel@256 " + fmt("%.3e", worst256) + ", min observed order " + fmt("%.2f", min_order)};
}

Outcome scalar_falsification() {
    std::string detail;
    bool ok = true;
    for (const auto& M : {OperatorSpec::blur(0.05), OperatorSpec::local_average(0.1)}) {
        const SuiteResult r =
            falsification_suite_scalar(M, standard_diffeo_bank(), standard_scalar_fields(), ladder_settings());
        if (!r.witness) return {false, M.label + " not falsified"};
        double lo = 1e300, hi = 0.0;
        for (const auto& rep : r.reports)
            if (rep.diffeo_label == r.witness->diffeo_label && rep.field_label == r.witness->field_label) {
                lo = std::min(lo, rep.defect_rel);
                hi = std::max(hi, rep.defect_rel);
            }
        const double w = r.witness->defect_rel;
        const bool stable = lo >= 0.8 * w && hi <= 1.2 * w;
        ok = ok && w >= 0.1 && stable;
        detail += M.label + " witness " + r.witness->diffeo_label + "/" + r.witness->field_label + " " +
                  fmt("%.4f", w) + " range [" + fmt("%.4f", lo) + ", " + fmt("%.4f", hi) + "]; ";
    }
    return {ok, detail};
}

Outcome vector_multiples() {
    std::string detail;
    bool ok = true;
    for (double lambda : {-1.5, 0.0, 2.0}) {
        const SuiteResult r = falsification_suite_vector(OperatorSpec::scalar_multiple(lambda), standard_diffeo_bank(),
                                                         standard_vector_fields(), ladder_settings());
        const double err = std::abs(r.fitted_lambda - lambda);
        ok = ok && r.verdict == Verdict::Consistent && err <= 1e-6;
        detail += "lambda " + fmt("%g", lambda) + " fit error " + fmt("%.1e", err) + "; ";
    }
    for (const auto& M : {OperatorSpec::vector_gain("tanh"), OperatorSpec::blur(0.05)}) {
        const SuiteResult r =
            falsification_suite_vector(M, standard_diffeo_bank(), standard_vector_fields(), ladder_settings());
        ok = ok && r.verdict == Verdict::Falsified;
        detail += M.label + (r.witness ? " falsified by " + r.witness->diffeo_label : std::string(" not falsified")) + "; ";
    }
    return {ok, detail};
}

Outcome norm_bound() {
    const ChartDomain chart = standard_chart(256);
    double worst = 0.0;
    for (const auto& df : standard_diffeo_bank()) {
            const NormEstimate e = operator_norm_estimate(df.make(chart), 64, 2.0, FieldKind::Vector);
        worst = std::max(worst, e.estimate / e.analytic_bound);
    }
    return {worst <= 1.01, "max estimate/bound " + fmt("%.4f", worst) + " (limit 1.01)"};
}

Outcome node_identities() {
    const ChartDomain c = standard_chart(256);
    const auto B = [](double x, double y, double r) { return BallRegion{make_vec({x, y}), r}; };
    const std::vector<BallRegion> singles{B(0.5, 0.5, 0.15), B(0.4, 0.45, 0.1), B(0.62, 0.52, 0.07), B(0.05, 0.95, 0.2)};
    const std::vector<std::vector<BallRegion>> disjoint{{B(0.3, 0.3, 0.12), B(0.65, 0.4, 0.1), B(0.45, 0.7, 0.12)},
                                                        {B(0.42, 0.5, 0.09), B(0.62, 0.52, 0.09)}};
    const std::vector<std::vector<BallRegion>> covers{
        {B(0.4, 0.4, 0.3), B(0.6, 0.4, 0.3), B(0.4, 0.6, 0.3), B(0.6, 0.6, 0.3)},
        {B(0.42, 0.5, 0.32), B(0.58, 0.5, 0.32)},
        {B(0.5, 0.38, 0.3), B(0.38, 0.6, 0.3), B(0.62, 0.6, 0.3)}};
    double worst = 0.0;
    int checks = 0;
    for (const char* rho : {"relu", "tanh", "abs", "identity", "sin"}) {
        const OperatorSpec M = OperatorSpec::pointwise(rho);
        for (const auto& ff : standard_scalar_fields()) {
            const SampledField f = ff.make(c);
            for (double p : {1.0, 2.0}) {
                for (const auto& U : singles) worst = std::max(worst, localization_check(M, f, U, p)), ++checks;
                for (const auto& R : disjoint) worst = std::max(worst, disjoint_union_check(M, f, R, p)), ++checks;
                for (const auto& C : covers) worst = std::max(worst, inclusion_exclusion_reconstruct(M, f, C, p)), ++checks;
            }
        }
    }
    return {worst == 0.0, std::to_string(checks) + " checks, largest value " + fmt("%g", worst)};
}

Outcome local_vitali() {
    const ChartDomain c = standard_chart(512);
    const SampledField f = standard_scalar_fields()[0].make(c);
    const BallRegion U{make_vec({0.5, 0.5}), 0.18};
    const double base = lp_norm(mask_field(f, U), 2.0);
    try {
        const VitaliResult r = vitali_approximate(f, U, 0.05 * base, 4000, 2.0);
        return {r.achieved_error < 0.05 * base, std::to_string(r.pieces.size()) + " balls, error/|1_U f| " +
                                                    fmt("%.5f", r.achieved_error / base) + " (limit 0.05)"};
    } catch (const BudgetExhausted& e) {
        return {false, "4000 balls not enough, best error/|1_U f| " + fmt("%.5f", e.best() / base)};
    }
}

Outcome rotation_invariance() {
    const ChartDomain box = ChartDomain::box({-1.0, -1.0}, {1.0, 1.0}, {256, 256});
    const BallRegion ball{make_vec({0.0, 0.0}), 0.9};
    const SampledField F = SampledField::vector(box, [](const Vec& x) -> Vec { return x.norm() * x; });
    const RotationFit fit = rotation_invariance_fit(F, ball, 8, false, 32, kDefaultSeed + 2);
    double bin_err = 0.0;
    for (const auto& b : fit.bins) bin_err = std::max(bin_err, std::abs(b.lambda - b.mean_radius));
    const SampledField G = SampledField::vector(box, [](const Vec& x) -> Vec {
        const double r = x.norm();
        return r * x + 0.5 * r * r * make_vec({-x(1), x(0)});
    });
    const double so = rotation_invariance_fit(G, ball, 8, true, 32, kDefaultSeed + 2).max_violation;
    const double o = rotation_invariance_fit(G, ball, 8, false, 32, kDefaultSeed + 2).max_violation;
    const bool ok = bin_err <= 1e-3 && fit.orthogonal_residual <= 1e-3 && fit.max_violation <= 1e-3 && o > 1e-2 && o > 100.0 * so;
    return {ok, "per-bin error " + fmt("%.1e", bin_err) + ", orthogonal residual " + fmt("%.1e", fit.orthogonal_residual) +
                    ", violation " + fmt("%.1e", fit.max_violation) +
                    ", rotational part: SO(2) violation " + fmt("%.1e", so) + " vs O(2) " + fmt("%.3f", o)};
}

Outcome zoo_demos() {
    const ChartDomain c = standard_chart(256);
    const OperatorSpec sup = OperatorSpec::sup();
    double sup_defect = 0.0, sup_local = 0.0;
    for (const auto& ff : standard_scalar_fields()) {
        const SampledField f = ff.make(c);
        for (int k : {1, 7, 32}) {
            const Diffeo phi = make_translation(c, make_vec({k * c.spacing(0), (k + 1) * c.spacing(1)}));
            sup_defect = std::max(sup_defect, equivariance_defect(sup, phi, f, 2.0).defect_abs);
        }
        sup_local = std::max(sup_local, localization_check(sup, f, BallRegion{make_vec({0.45, 0.5}), 0.08}, 2.0));
    }
    const SampledField z = m_zero_image(OperatorSpec::exp_phase(), c, FieldKind::Scalar);
    const bool phase_ok = is_constant_field(z) && z.value_at(0)(0) == 1.0 && z.value_at(0)(1) == 0.0;
    const double lip = lipschitz_estimate(OperatorSpec::sqrt_pointwise(), 2.0, 32, c, {1e-4, true}, kDefaultSeed + 1);
    const bool ok = sup_defect == 0.0 && sup_local > 0.0 && phase_ok && lip > 10.0;
    return {ok, "sup defect " + fmt("%g", sup_defect) + ", sup locality probe " + fmt("%.3f", sup_local) +
                    ", exp_phase(0) = (1,0) " + (phase_ok ? "yes" : "no") + ", sqrt Lipschitz near 0 " +
                    fmt("%.1f", lip)};
}

Outcome contravariance() {
    const auto bank = standard_diffeo_bank();
    const auto fields = standard_scalar_fields();
    std::mt19937_64 rng(kDefaultSeed);
    double worst = 0.0, min_order = 1e9;
    for (int k = 0; k < 20; ++k) {
        const std::size_t i = rng() % bank.size(), j = rng() % bank.size(), fi = rng() % fields.size();
        std::vector<double> e;
        for (const auto& ch : ladder())
            e.push_back(check_contravariance(bank[i].make(ch), bank[j].make(ch), fields[fi].make(ch), 2.0));
        worst = std::max(worst, e[1]);
        if (e[2] <= kRoundoff) continue;
        for (double o : observed_orders(e)) min_order = std::min(min_order, o);
    }
    return {worst <= 5e-3 && min_order >= 2.0,
            "20 pairs, max@256 " + fmt("%.3e", worst) + ", min observed order " + fmt("%.2f", min_order)};
}

Outcome flowbox() {
    const ChartDomain c = standard_chart(256);
    const Vec m = make_vec({0.5, 0.5});
    const SampledField shear = SampledField::vector(c, [](const Vec& x) { return make_vec({1.0, 0.5 * (x(0) - 0.5)}); });
    const SampledField curved = SampledField::vector(
        c, [](const Vec& x) { return make_vec({1.0, 0.5 * std::sin(2.0 * std::numbers::pi * x(0))}); });
    auto residual = [&](const SampledField& f, double r) {
        return flowbox_residual(flowbox_straighten(f, m, r, 64), f, m, r);
    };
    const double s1 = residual(shear, 0.2), s2 = residual(shear, 0.1);
    const double c1 = residual(curved, 0.2), c2 = residual(curved, 0.1);
    const bool ok = s1 <= 1e-3 && s2 <= 0.5 * s1 && c1 <= 1e-3 && c2 <= 0.5 * c1;
    return {ok, "shear r=0.2 " + fmt("%.2e", s1) + " -> r=0.1 " + fmt("%.2e", s2) + "; curved " + fmt("%.2e", c1) +
                    " -> " + fmt("%.2e", c2) + " (ratio " + fmt("%.2f", c1 / c2) + ")"};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism() {
    const auto root = std::filesystem::temp_directory_path() / "diffeolab_acceptance";
    std::filesystem::remove_all(root);
    const ExperimentConfig config;
    double longest = 0.0;
    int codes[2];
    for (int k = 0; k < 2; ++k) {
        RunOptions o;
        o.out_dir = root / ("run" + std::to_string(k));
        const auto t0 = Clock::now();
        codes[k] = run_suite(config, o);
        longest = std::max(longest, seconds_since(t0));
    }
    bool same = true;
    for (const auto& name : {config.outputs.suite, config.outputs.scoreboard})
        same = same && slurp(root / "run0" / name) == slurp(root / "run1" / name) && !slurp(root / "run0" / name).empty();
    const bool ok = same && codes[0] == 0 && codes[1] == 0 && longest < 600.0;
    return {ok, std::string(same ? "byte-identical" : "outputs differ") + ", suite exit " + std::to_string(codes[0]) +
                    ", slowest run " + fmt("%.1f s", longest)};
}

}  // namespace

int main() {
    setvbuf(stdout, nullptr, _IONBF, 0);
    set_thread_count(static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));
    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"contraction-decay", contraction_decay},
        {"pointwise-scalar-consistent", pointwise_forward},
        {"scalar-falsification", scalar_falsification},
        {"vector-scalar-multiple", vector_multiples},
        {"operator-norm-bound", norm_bound},
        {"node-exact-identities", node_identities},
        {"local-vitali", local_vitali},
        {"rotation-invariance", rotation_invariance},
        {"operator-zoo", zoo_demos},
        {"contravariance", contravariance},
        {"flowbox", flowbox},
        {"determinism", determinism},
    };
    int failed = 0, index = 0;
    for (const auto& [name, run] : criteria) {
        ++index;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s %2d %-28s %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", index, name, o.detail.c_str(),
                    seconds_since(t0));
    }
    std::printf("%d/%d criteria pass\n", index - failed, index);
    return failed ? 1 : 0;
}
