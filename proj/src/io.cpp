#include "diffeolab/io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace diffeolab {

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::Serialization, what); }

const Json& member(const Json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) bad(std::string("missing key '") + key + "'");
    return j.at(key);
}

std::vector<double> number_list(const Json& j) {
    std::vector<double> out;
    if (j.is_number() || j.is_string()) {
        out.push_back(number_from_json(j));
        return out;
    }
    if (!j.is_array()) bad("expected a number or a list of numbers");
    for (const auto& x : j) out.push_back(number_from_json(x));
    return out;
}

Vec to_vec(const std::vector<double>& xs) {
    Vec v(static_cast<Eigen::Index>(xs.size()));
    for (std::size_t i = 0; i < xs.size(); ++i) v(static_cast<Eigen::Index>(i)) = xs[i];
    return v;
}

const std::vector<double>& param(const DiffeoRecord& r, const std::string& key) {
    const auto* v = r.find(key);
    if (!v) bad(r.constructor + " record lacks '" + key + "'");
    return *v;
}

double scalar_param(const DiffeoRecord& r, const std::string& key) {
    const auto& v = param(r, key);
    if (v.size() != 1) bad(r.constructor + " parameter '" + key + "' must be a single number");
    return v[0];
}

int int_param(const DiffeoRecord& r, const std::string& key) {
    const double x = scalar_param(r, key);
    if (x != std::round(x)) bad(r.constructor + " parameter '" + key + "' must be an integer");
    return static_cast<int>(x);
}

FieldKind field_kind_from(const std::string& s) {
    if (s == "scalar") return FieldKind::Scalar;
    if (s == "vector") return FieldKind::Vector;
    if (s == "complex") return FieldKind::Complex;
    bad("unknown field kind '" + s + "'");
}

InterpOrder interp_from(const std::string& s) {
    if (s == "linear") return InterpOrder::Linear;
    if (s == "cubic") return InterpOrder::Cubic;
    bad("unknown interpolation order '" + s + "'");
}

void put_u64_le(std::ostream& out, std::uint64_t x) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(x >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64_le(std::istream& in) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) bad("truncated field header");
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= std::uint64_t(b[i]) << (8 * i);
    return x;
}

}  // namespace

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

Json number_json(double x) {
    if (std::isfinite(x)) return x;
    return format_double(x);
}

double number_from_json(const Json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto& s = j.get_ref<const std::string&>();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
    }
    bad("expected a number, got " + j.dump());
}

Json parse_json_text(const std::string& text, const std::string& source) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        // e.byte is one past the offending character.
        std::size_t line = 1, col = 1;
        const std::size_t stop = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
        for (std::size_t i = 0; i < stop; ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        std::ostringstream os;
        os << source << ":" << line << ":" << col << ": " << e.what();
        throw Error(ErrorCode::Config, os.str());
    }
}

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Config, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_json_text(ss.str(), path.string());
}

Json chart_to_json(const ChartDomain& chart) {
    Json extent = Json::array(), resolution = Json::array();
    for (int a = 0; a < chart.dim(); ++a) {
        extent.push_back({chart.lower(a), chart.upper(a)});
        resolution.push_back(chart.resolution(a));
    }
    return Json{{"kind", chart.periodic() ? "torus" : "box"},
                {"dim", chart.dim()},
                {"extent", extent},
                {"resolution", resolution},
                {"boundary_margin", chart.boundary_margin()}};
}

ChartDomain chart_from_json(const Json& j) {
    const std::string kind = member(j, "kind").get<std::string>();
    const int dim = member(j, "dim").get<int>();
    const Json& extent = member(j, "extent");
    const Json& res = member(j, "resolution");
    if (!extent.is_array() || static_cast<int>(extent.size()) != dim)
        throw Error(ErrorCode::InvalidChart, "extent must list one [lower, upper] pair per axis");
    std::vector<double> lo, hi;
    for (const auto& e : extent) {
        if (!e.is_array() || e.size() != 2) throw Error(ErrorCode::InvalidChart, "extent entries must be [lower, upper]");
        lo.push_back(e[0].get<double>());
        hi.push_back(e[1].get<double>());
    }
    std::vector<int> n;
    if (res.is_number_integer()) {
        n.assign(dim, res.get<int>());
    } else {
        n = res.get<std::vector<int>>();
    }
    const double margin = j.value("boundary_margin", 0.0);
    if (kind == "torus") {
        if (margin != 0.0) throw Error(ErrorCode::InvalidChart, "a torus has no boundary margin");
        return ChartDomain::torus(lo, hi, n);
    }
    if (kind == "box") return ChartDomain::box(lo, hi, n, margin);
    throw Error(ErrorCode::InvalidChart, "unknown chart kind '" + kind + "'");
}

void write_field_binary(const SampledField& f, std::ostream& out) {
    const Json header{{"chart", chart_to_json(f.chart())},
                      {"kind", to_string(f.kind())},
                      {"interp", to_string(f.interp_order())},
                      {"components", f.components()},
                      {"nodes", f.node_count()}};
    const std::string text = header.dump();
    put_u64_le(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (double x : f.values()) put_u64_le(out, std::bit_cast<std::uint64_t>(x));
    if (!out) bad("write failed");
}

SampledField read_field_binary(std::istream& in) {
    const std::uint64_t len = get_u64_le(in);
    if (len > (1u << 24)) bad("field header is implausibly long");
    std::string text(len, '\0');
    if (!in.read(text.data(), static_cast<std::streamsize>(len))) bad("truncated field header");
    const Json header = parse_json_text(text, "field header");
    const ChartDomain chart = chart_from_json(member(header, "chart"));
    const FieldKind kind = field_kind_from(member(header, "kind").get<std::string>());
    const InterpOrder interp = interp_from(header.value("interp", std::string("cubic")));
    const int nc = component_count(kind, chart.dim());
    if (header.contains("components") && header["components"].get<int>() != nc) bad("component count mismatch");
    std::vector<double> values(chart.node_count() * static_cast<std::size_t>(nc));
    for (double& x : values) x = std::bit_cast<double>(get_u64_le(in));
    return SampledField(chart, kind, std::move(values), interp);
}

void save_field(const SampledField& f, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) bad("cannot open " + path.string());
    write_field_binary(f, out);
}

SampledField load_field(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) bad("cannot open " + path.string());
    return read_field_binary(in);
}

void write_field_csv(const SampledField& f, std::ostream& out) {
    const int d = f.chart().dim();
    for (int a = 0; a < d; ++a) out << (a ? "," : "") << 'x' << a;
    for (int c = 0; c < f.components(); ++c) out << ",v" << c;
    out << '\n';
    const auto v = f.values();
    for (std::size_t i = 0; i < f.node_count(); ++i) {
        const Vec x = f.chart().node(i);
        for (int a = 0; a < d; ++a) out << (a ? "," : "") << format_double(x(a));
        for (int c = 0; c < f.components(); ++c) out << ',' << format_double(v[i * f.components() + c]);
        out << '\n';
    }
}

Json diffeo_record_to_json(const DiffeoRecord& r) {
    Json j;
    j["constructor"] = r.constructor;
    if (r.constructor == "compose") {
        // Nested compositions flatten into one ordered list.
        Json seq = Json::array();
        for (const auto& c : r.children) {
            Json cj = diffeo_record_to_json(c);
            if (cj["constructor"] == "compose") {
                for (auto& x : cj["sequence"]) seq.push_back(std::move(x));
            } else {
                seq.push_back(std::move(cj));
            }
        }
        j["sequence"] = std::move(seq);
        return j;
    }
    if (r.constructor == "inverse") {
        if (r.children.size() != 1) bad("inverse record needs exactly one child");
        j["of"] = diffeo_record_to_json(r.children[0]);
        return j;
    }
    for (const auto& [k, v] : r.params) {
        if (v.size() == 1) {
            j[k] = number_json(v[0]);
        } else {
            Json arr = Json::array();
            for (double x : v) arr.push_back(number_json(x));
            j[k] = std::move(arr);
        }
    }
    return j;
}

DiffeoRecord diffeo_record_from_json(const Json& j) {
    DiffeoRecord r;
    r.constructor = member(j, "constructor").get<std::string>();
    if (r.constructor == "compose") {
        const Json& seq = member(j, "sequence");
        if (!seq.is_array() || seq.empty()) bad("compose needs a non-empty sequence");
        for (const auto& c : seq) r.children.push_back(diffeo_record_from_json(c));
        return r;
    }
    if (r.constructor == "inverse") {
        r.children.push_back(diffeo_record_from_json(member(j, "of")));
        return r;
    }
    for (const auto& [k, v] : j.items()) {
        if (k == "constructor") continue;
        r.params.emplace_back(k, number_list(v));
    }
    return r;
}

Diffeo diffeo_from_record(const DiffeoRecord& r, const ChartDomain& chart) {
    const std::string& c = r.constructor;
    if (c == "identity") return Diffeo::identity(chart);
    if (c == "inverse") {
        if (r.children.size() != 1) bad("inverse record needs exactly one child");
        return diffeo_from_record(r.children[0], chart).inverted();
    }
    if (c == "compose") {
        if (r.children.empty()) bad("compose record needs at least one factor");
        Diffeo out = diffeo_from_record(r.children[0], chart);
        for (std::size_t i = 1; i < r.children.size(); ++i) out = compose(diffeo_from_record(r.children[i], chart), out);
        return out;
    }
    if (c == "contraction")
        return make_contraction(chart, int_param(r, "n"), scalar_param(r, "eps"), to_vec(param(r, "center")),
                                r.find("scale") ? scalar_param(r, "scale") : 1.0);
    if (c == "point_transport") {
        const BallRegion ambient{to_vec(param(r, "ambient_center")), scalar_param(r, "ambient_radius")};
        return make_point_transport(chart, to_vec(param(r, "x0")), to_vec(param(r, "x1")), ambient,
                                    r.find("steps") ? int_param(r, "steps") : 0);
    }
    if (c == "rotation_conjugation") {
        const auto& w = param(r, "W");
        const int d = chart.dim();
        if (static_cast<int>(w.size()) != d * d) bad("W must hold d*d entries");
        Mat W(d, d);
        for (int i = 0; i < d; ++i)
            for (int k = 0; k < d; ++k) W(i, k) = w[i * d + k];
        const BallRegion region{to_vec(param(r, "center")), scalar_param(r, "inner_radius")};
        return make_rotation_conjugation(chart, W, region, scalar_param(r, "blend"));
    }
    if (c == "translation") return make_translation(chart, to_vec(param(r, "shift")));
    if (c == "axis_stretch")
        return make_axis_stretch(chart, to_vec(param(r, "center")), int_param(r, "axis"), scalar_param(r, "amplitude"),
                                 scalar_param(r, "half_width"), scalar_param(r, "cross_radius"));
    if (c == "flowbox") bad("flowbox charts are built from a sampled field and cannot be rebuilt from a record");
    bad("unknown diffeo constructor '" + c + "'");
}

Json operator_to_json(const OperatorSpec& M) {
    Json params = Json::object();
    std::visit(
        [&](const auto& k) {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, op::PointwiseScalar> || std::is_same_v<K, op::PointwiseVectorGain>)
                params["rho"] = k.rho;
            else if constexpr (std::is_same_v<K, op::ScalarMultipleVector>)
                params["lambda"] = k.lambda;
            else if constexpr (std::is_same_v<K, op::GaussianBlur>)
                params["sigma"] = k.sigma;
            else if constexpr (std::is_same_v<K, op::LocalAverage>)
                params["radius"] = k.radius;
        },
        M.kind);
    return Json{{"label", M.label}, {"kind", M.kind_name()}, {"params", params}};
}

OperatorSpec operator_from_json(const Json& j) {
    const std::string kind = member(j, "kind").get<std::string>();
    const Json params = j.contains("params") ? j.at("params") : Json::object();
    auto num = [&](const char* key) { return number_from_json(member(params, key)); };
    auto str = [&](const char* key) { return member(params, key).get<std::string>(); };
    OperatorSpec M = [&] {
        if (kind == "pointwise") return OperatorSpec::pointwise(str("rho"));
        if (kind == "scalar_multiple") return OperatorSpec::scalar_multiple(num("lambda"));
        if (kind == "vector_gain") return OperatorSpec::vector_gain(str("rho"));
        if (kind == "blur") return OperatorSpec::blur(num("sigma"));
        if (kind == "sup") return OperatorSpec::sup();
        if (kind == "exp_phase") return OperatorSpec::exp_phase();
        if (kind == "sqrt") return OperatorSpec::sqrt_pointwise();
        if (kind == "local_average") return OperatorSpec::local_average(num("radius"));
        bad("unknown operator kind '" + kind + "'");
    }();
    if (j.contains("label")) M.label = j.at("label").get<std::string>();
    return M;
}

std::string grid_string(const std::vector<int>& grid) {
    std::string s;
    for (std::size_t i = 0; i < grid.size(); ++i) s += (i ? "x" : "") + std::to_string(grid[i]);
    return s;
}

Json report_to_json(const DefectReport& r, const std::string& verdict) {
    return Json{{"operator", r.operator_label},       {"diffeo", r.diffeo_label},
                {"field", r.field_label},             {"p", number_json(r.p)},
                {"grid", r.grid},                     {"defect_abs", number_json(r.defect_abs)},
                {"defect_rel", number_json(r.defect_rel)}, {"interp_residual", number_json(r.interp_residual)},
                {"verdict", verdict}};
}

const char* report_csv_header() { return "operator,diffeo,field,p,grid,defect_abs,defect_rel,verdict"; }

std::string report_csv_row(const DefectReport& r, const std::string& verdict) {
    return r.operator_label + "," + r.diffeo_label + "," + r.field_label + "," + format_double(r.p) + "," +
           grid_string(r.grid) + "," + format_double(r.defect_abs) + "," + format_double(r.defect_rel) + "," + verdict;
}

}  // namespace diffeolab
