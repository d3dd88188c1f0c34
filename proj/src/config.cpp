#include "diffeolab/runner.hpp"

#include <set>

namespace diffeolab {

namespace {

[[noreturn]] void config_error(const std::string& where, const std::string& what) {
    throw Error(ErrorCode::Config, where + ": " + what);
}

// Object reader that rejects keys nobody asked for.
class Reader {
public:
    Reader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) config_error(where_, "expected an object");
    }

    bool has(const char* key) const { return j_.contains(key); }
    std::string path(const char* key) const { return where_ + "." + key; }

    const Json* get(const char* key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    template <class T>
    void read(const char* key, T& out) {
        if (const Json* v = get(key)) {
            try {
                out = v->get<T>();
            } catch (const nlohmann::json::exception& e) {
                config_error(path(key), e.what());
            }
        }
    }

    void read_number(const char* key, double& out) {
        if (const Json* v = get(key)) out = convert(path(key), [&] { return number_from_json(*v); });
    }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) config_error(where_, "unknown key '" + k + "'");
    }

    template <class F>
    static auto convert(const std::string& where, F&& fn) -> decltype(fn()) {
        try {
            return fn();
        } catch (const Error& e) {
            if (e.code() == ErrorCode::Config) throw;
            config_error(where, e.what());
        } catch (const nlohmann::json::exception& e) {
            config_error(where, e.what());
        }
    }

private:
    const Json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

Json vec_json(const Vec& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

Vec vec_from(const Json& j) {
    const auto xs = j.get<std::vector<double>>();
    Vec v(static_cast<Eigen::Index>(xs.size()));
    for (std::size_t i = 0; i < xs.size(); ++i) v(static_cast<Eigen::Index>(i)) = xs[i];
    return v;
}

FieldKind kind_from(const std::string& where, const std::string& s) {
    if (s == "scalar") return FieldKind::Scalar;
    if (s == "vector") return FieldKind::Vector;
    config_error(where, "field kind must be 'scalar' or 'vector'");
}

Verdict verdict_from(const std::string& where, const std::string& s) {
    if (s == "consistent") return Verdict::Consistent;
    if (s == "falsified") return Verdict::Falsified;
    config_error(where, "expected verdict must be 'consistent' or 'falsified'");
}

Json field_to_json(const FieldSpec& f) {
    Json terms = Json::array();
    for (const auto& t : f.terms) {
        Json tj{{"shape", t.shape}, {"center", vec_json(t.center)}, {"radius", t.radius}, {"amplitude", t.amplitude}};
        if (t.direction.size()) tj["direction"] = vec_json(t.direction);
        terms.push_back(std::move(tj));
    }
    return Json{{"label", f.label}, {"kind", to_string(f.kind)}, {"terms", std::move(terms)}};
}

FieldSpec field_from_json(const Json& j, const std::string& where) {
    Reader r(j, where);
    FieldSpec f;
    r.read("label", f.label);
    std::string kind = "scalar";
    r.read("kind", kind);
    f.kind = kind_from(r.path("kind"), kind);
    const Json* terms = r.get("terms");
    if (!terms || !terms->is_array()) config_error(where, "a field needs a 'terms' list");
    for (std::size_t i = 0; i < terms->size(); ++i) {
        Reader t((*terms)[i], where + ".terms[" + std::to_string(i) + "]");
        FieldTerm term;
        t.read("shape", term.shape);
        if (const Json* c = t.get("center")) term.center = Reader::convert(t.path("center"), [&] { return vec_from(*c); });
        t.read_number("radius", term.radius);
        t.read_number("amplitude", term.amplitude);
        if (const Json* d = t.get("direction"))
            term.direction = Reader::convert(t.path("direction"), [&] { return vec_from(*d); });
        t.finish();
        f.terms.push_back(std::move(term));
    }
    r.finish();
    if (f.label.empty()) config_error(where, "a field needs a label");
    return f;
}

Json operator_entry_to_json(const OperatorEntry& e) {
    Json j = operator_to_json(e.op);
    if (e.expected) j["expected"] = to_string(*e.expected);
    if (e.field_kind) j["field_kind"] = to_string(*e.field_kind);
    return j;
}

OperatorEntry operator_entry_from_json(const Json& j, const std::string& where) {
    Reader r(j, where);
    OperatorEntry e{OperatorSpec::sup(), std::nullopt, std::nullopt};
    Json op = Json::object();
    for (const char* key : {"label", "kind", "params"})
        if (const Json* v = r.get(key)) op[key] = *v;
    e.op = Reader::convert(where, [&] { return operator_from_json(op); });
    std::string s;
    if (r.has("expected")) {
        r.read("expected", s);
        e.expected = verdict_from(r.path("expected"), s);
    }
    if (r.has("field_kind")) {
        r.read("field_kind", s);
        e.field_kind = kind_from(r.path("field_kind"), s);
        if (!e.op.accepts(*e.field_kind)) config_error(where, e.op.label + " does not act on " + s + " fields");
    }
    r.finish();
    return e;
}

std::vector<FieldSpec> standard_fields() {
    auto out = standard_scalar_field_specs();
    for (auto& f : standard_vector_field_specs()) out.push_back(std::move(f));
    return out;
}

std::vector<OperatorEntry> standard_operators() {
    const auto C = Verdict::Consistent, F = Verdict::Falsified;
    const auto S = FieldKind::Scalar, V = FieldKind::Vector;
    return {
        {OperatorSpec::pointwise("relu"), C, S},         {OperatorSpec::pointwise("tanh"), C, S},
        {OperatorSpec::pointwise("abs"), C, S},          {OperatorSpec::blur(0.05), F, S},
        {OperatorSpec::local_average(0.1), F, S},        {OperatorSpec::scalar_multiple(-1.5), C, V},
        {OperatorSpec::scalar_multiple(0.0), C, V},      {OperatorSpec::scalar_multiple(2.0), C, V},
        {OperatorSpec::vector_gain("tanh"), F, V},       {OperatorSpec::blur(0.05), F, V},
    };
}

}  // namespace

Verdict OperatorEntry::expected_verdict() const {
    if (expected) return *expected;
    return op.pointwise_kind() || std::holds_alternative<op::SupOperator>(op.kind) ? Verdict::Consistent
                                                                                   : Verdict::Falsified;
}

FieldKind OperatorEntry::suite_kind() const {
    if (field_kind) return *field_kind;
    return op.accepts(FieldKind::Scalar) ? FieldKind::Scalar : FieldKind::Vector;
}

ExperimentConfig::ExperimentConfig() : fields(standard_fields()), operators(standard_operators()) {}

Json config_to_json(const ExperimentConfig& c) {
    Json diffeos = Json::array();
    for (const auto& d : c.diffeos) diffeos.push_back(Json{{"label", d.label}, {"map", diffeo_record_to_json(d.record)}});
    Json fields = Json::array();
    for (const auto& f : c.fields) fields.push_back(field_to_json(f));
    Json ops = Json::array();
    for (const auto& e : c.operators) ops.push_back(operator_entry_to_json(e));
    const auto& dc = c.decay;
    const auto& v = c.vitali;
    const auto& o = c.outputs;
    return Json{
        {"chart", chart_to_json(c.chart)},
        {"levels", c.levels},
        {"p", c.p_values},
        {"seed", c.seed},
        {"budget", c.budget},
        {"baseline_factor", c.baseline_factor},
        {"noise_floor", c.noise_floor},
        {"diffeos", std::move(diffeos)},
        {"fields", std::move(fields)},
        {"operators", std::move(ops)},
        {"decay",
         {{"dims", dc.dims},
          {"p", dc.p_values},
          {"n", dc.n_values},
          {"resolution", dc.resolution},
          {"scale", dc.scale},
          {"eps", dc.eps},
          {"bump_radius", dc.bump_radius},
          {"slack", dc.slack}}},
        {"vitali",
         {{"field", v.field},
          {"center", vec_json(v.region.center)},
          {"radius", v.region.radius},
          {"resolution", v.resolution},
          {"eps_fraction", v.eps_fraction},
          {"max_balls", v.max_balls},
          {"p", v.p}}},
        {"norm_bound", {{"trials", c.norm_bound.trials}, {"p", c.norm_bound.p}, {"slack", c.norm_bound.slack}}},
        {"outputs",
         {{"reports", o.reports},
          {"summary", o.summary},
          {"verdicts", o.verdicts},
          {"decay", o.decay},
          {"norm_bound", o.norm_bound},
          {"vitali", o.vitali},
          {"vitali_summary", o.vitali_summary},
          {"zoo", o.zoo},
          {"suite", o.suite},
          {"scoreboard", o.scoreboard}}},
    };
}

ExperimentConfig config_from_json(const Json& j) {
    ExperimentConfig c;
    Reader r(j, "config");
    if (const Json* chart = r.get("chart")) c.chart = Reader::convert("config.chart", [&] { return chart_from_json(*chart); });
    r.read("levels", c.levels);
    if (const Json* p = r.get("p")) {
        if (p->is_number()) c.p_values = {p->get<double>()};
        else r.read("p", c.p_values);
    }
    r.read("seed", c.seed);
    r.read("budget", c.budget);
    r.read_number("baseline_factor", c.baseline_factor);
    r.read_number("noise_floor", c.noise_floor);

    if (const Json* d = r.get("diffeos"); d && !(d->is_string() && *d == "standard")) {
        if (!d->is_array()) config_error("config.diffeos", "expected \"standard\" or a list");
        c.diffeos.clear();
        for (std::size_t i = 0; i < d->size(); ++i) {
            const std::string where = "config.diffeos[" + std::to_string(i) + "]";
            Reader e((*d)[i], where);
            DiffeoSpec spec;
            e.read("label", spec.label);
            const Json* map = e.get("map");
            if (!map) config_error(where, "missing 'map'");
            spec.record = Reader::convert(where, [&] { return diffeo_record_from_json(*map); });
            e.finish();
            if (spec.label.empty()) config_error(where, "a diffeo needs a label");
            // Build once on the base chart so bad parameters surface here.
            Reader::convert(where, [&] { return diffeo_from_record(spec.record, c.chart); });
            c.diffeos.push_back(std::move(spec));
        }
    }
    if (const Json* f = r.get("fields"); f && !(f->is_string() && *f == "standard")) {
        if (!f->is_array()) config_error("config.fields", "expected \"standard\" or a list");
        c.fields.clear();
        for (std::size_t i = 0; i < f->size(); ++i)
            c.fields.push_back(field_from_json((*f)[i], "config.fields[" + std::to_string(i) + "]"));
    }
    if (const Json* ops = r.get("operators"); ops && !(ops->is_string() && *ops == "standard")) {
        if (!ops->is_array()) config_error("config.operators", "expected \"standard\" or a list");
        c.operators.clear();
        for (std::size_t i = 0; i < ops->size(); ++i)
            c.operators.push_back(operator_entry_from_json((*ops)[i], "config.operators[" + std::to_string(i) + "]"));
    }
    if (const Json* d = r.get("decay")) {
        Reader e(*d, "config.decay");
        e.read("dims", c.decay.dims);
        e.read("p", c.decay.p_values);
        e.read("n", c.decay.n_values);
        e.read("resolution", c.decay.resolution);
        e.read_number("scale", c.decay.scale);
        e.read_number("eps", c.decay.eps);
        e.read_number("bump_radius", c.decay.bump_radius);
        e.read_number("slack", c.decay.slack);
        e.finish();
    }
    if (const Json* v = r.get("vitali")) {
        Reader e(*v, "config.vitali");
        e.read("field", c.vitali.field);
        if (const Json* ctr = e.get("center"))
            c.vitali.region.center = Reader::convert("config.vitali.center", [&] { return vec_from(*ctr); });
        e.read_number("radius", c.vitali.region.radius);
        e.read("resolution", c.vitali.resolution);
        e.read_number("eps_fraction", c.vitali.eps_fraction);
        e.read("max_balls", c.vitali.max_balls);
        e.read_number("p", c.vitali.p);
        e.finish();
    }
    if (const Json* n = r.get("norm_bound")) {
        Reader e(*n, "config.norm_bound");
        e.read("trials", c.norm_bound.trials);
        e.read_number("p", c.norm_bound.p);
        e.read_number("slack", c.norm_bound.slack);
        e.finish();
    }
    if (const Json* o = r.get("outputs")) {
        Reader e(*o, "config.outputs");
        auto& out = c.outputs;
        e.read("reports", out.reports);
        e.read("summary", out.summary);
        e.read("verdicts", out.verdicts);
        e.read("decay", out.decay);
        e.read("norm_bound", out.norm_bound);
        e.read("vitali", out.vitali);
        e.read("vitali_summary", out.vitali_summary);
        e.read("zoo", out.zoo);
        e.read("suite", out.suite);
        e.read("scoreboard", out.scoreboard);
        e.finish();
    }
    r.finish();

    if (c.levels.empty()) config_error("config.levels", "at least one refinement level is required");
    for (int n : c.levels)
        if (n < 2) config_error("config.levels", "resolutions must be >= 2");
    if (c.p_values.empty()) config_error("config.p", "at least one exponent is required");
    for (double p : c.p_values)
        if (!(p >= 1.0)) config_error("config.p", "exponents must be >= 1");
    std::set<std::string> labels;
    for (const auto& f : c.fields)
        if (!labels.insert(f.label).second) config_error("config.fields", "duplicate label '" + f.label + "'");
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) { return config_from_json(read_json_file(path)); }

}  // namespace diffeolab
