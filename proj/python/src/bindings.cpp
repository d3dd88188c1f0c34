#include "diffeolab/analysis.hpp"
#include "diffeolab/bank.hpp"
#include "diffeolab/io.hpp"
#include "diffeolab/parallel.hpp"
#include "diffeolab/runner.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace diffeolab;

namespace {

// JSON crosses the boundary as text; the Python side decodes it.
Json from_text(const std::string& s) { return parse_json_text(s, "<python>"); }

Vec to_vec(const std::vector<double>& xs) {
    Vec v(static_cast<Eigen::Index>(xs.size()));
    for (std::size_t i = 0; i < xs.size(); ++i) v(static_cast<Eigen::Index>(i)) = xs[i];
    return v;
}

std::vector<double> from_vec(const Vec& v) { return {v.data(), v.data() + v.size()}; }

FieldKind kind_from_name(const std::string& s) {
    if (s == "scalar") return FieldKind::Scalar;
    if (s == "vector") return FieldKind::Vector;
    if (s == "complex") return FieldKind::Complex;
    throw Error(ErrorCode::Config, "unknown field kind '" + s + "'");
}

SampledField field_from_array(const ChartDomain& chart, const std::string& kind,
                              py::array_t<double, py::array::c_style | py::array::forcecast> values) {
    const FieldKind k = kind_from_name(kind);
    const std::size_t want = chart.node_count() * static_cast<std::size_t>(component_count(k, chart.dim()));
    if (static_cast<std::size_t>(values.size()) != want)
        throw Error(ErrorCode::Precondition,
                    "expected " + std::to_string(want) + " values, got " + std::to_string(values.size()));
    return SampledField(chart, k, std::vector<double>(values.data(), values.data() + values.size()));
}

py::array_t<double> field_to_array(const SampledField& f) {
    const auto v = f.values();
    const auto n = static_cast<py::ssize_t>(f.node_count());
    py::array_t<double> out = f.kind() == FieldKind::Scalar
                                  ? py::array_t<double>({n})
                                  : py::array_t<double>({n, static_cast<py::ssize_t>(f.components())});
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

py::array_t<double> chart_nodes(const ChartDomain& c) {
    py::array_t<double> out({static_cast<py::ssize_t>(c.node_count()), static_cast<py::ssize_t>(c.dim())});
    auto m = out.mutable_unchecked<2>();
    for (std::size_t k = 0; k < c.node_count(); ++k) {
        const Vec x = c.node(k);
        for (int a = 0; a < c.dim(); ++a) m(static_cast<py::ssize_t>(k), a) = x(a);
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Diffeomorphism actions on sampled fields and equivariance-defect tests";

    py::register_exception<Error>(m, "DiffeolabError", PyExc_RuntimeError);

    py::class_<ChartDomain>(m, "Chart")
        .def_static("unit_torus", &ChartDomain::unit_torus, py::arg("dim"), py::arg("n"))
        .def_static("box", &ChartDomain::box, py::arg("lower"), py::arg("upper"), py::arg("resolution"),
                    py::arg("boundary_margin") = 0.0)
        .def_static("torus", &ChartDomain::torus, py::arg("lower"), py::arg("upper"), py::arg("resolution"))
        .def_static("standard", &standard_chart, py::arg("n"))
        .def_static("from_json_text", [](const std::string& s) { return chart_from_json(from_text(s)); })
        .def("to_json_text", [](const ChartDomain& c) { return chart_to_json(c).dump(); })
        .def_property_readonly("dim", &ChartDomain::dim)
        .def_property_readonly("periodic", &ChartDomain::periodic)
        .def_property_readonly("node_count", &ChartDomain::node_count)
        .def_property_readonly("resolution",
                               [](const ChartDomain& c) {
                                   std::vector<int> r;
                                   for (int a = 0; a < c.dim(); ++a) r.push_back(c.resolution(a));
                                   return r;
                               })
        .def("nodes", &chart_nodes)
        .def("__eq__", [](const ChartDomain& a, const ChartDomain& b) { return a == b; })
        .def("__repr__", [](const ChartDomain& c) { return "Chart(" + chart_to_json(c).dump() + ")"; });

    py::class_<SampledField>(m, "Field")
        .def(py::init(&field_from_array), py::arg("chart"), py::arg("kind"), py::arg("values"))
        .def_property_readonly("chart", &SampledField::chart)
        .def_property_readonly("kind", [](const SampledField& f) { return std::string(to_string(f.kind())); })
        .def_property_readonly("components", &SampledField::components)
        .def("values", &field_to_array)
        .def("eval", [](const SampledField& f, const std::vector<double>& u) { return from_vec(f.eval(to_vec(u))); })
        .def("save", [](const SampledField& f, const std::filesystem::path& p) { save_field(f, p); })
        .def_static("load", &load_field);

    py::class_<Diffeo>(m, "Diffeo")
        .def_static("from_json_text",
                    [](const std::string& s, const ChartDomain& c) {
                        return diffeo_from_record(diffeo_record_from_json(from_text(s)), c);
                    })
        .def("to_json_text", [](const Diffeo& d) { return diffeo_record_to_json(d.record()).dump(); })
        .def_property_readonly("label", &Diffeo::label)
        .def("forward", [](const Diffeo& d, const std::vector<double>& u) { return from_vec(d.forward(to_vec(u))); })
        .def("inverse", [](const Diffeo& d, const std::vector<double>& u) { return from_vec(d.inverse(to_vec(u))); })
        .def("inverted", &Diffeo::inverted);

    py::class_<OperatorSpec>(m, "Operator")
        .def_static("from_json_text", [](const std::string& s) { return operator_from_json(from_text(s)); })
        .def("to_json_text", [](const OperatorSpec& M) { return operator_to_json(M).dump(); })
        .def_readonly("label", &OperatorSpec::label)
        .def("apply", [](const OperatorSpec& M, const SampledField& f) { return apply(M, f); });

    m.def("lp_norm", &lp_norm, py::arg("field"), py::arg("p") = 2.0);
    m.def("lp_distance", &lp_distance, py::arg("a"), py::arg("b"), py::arg("p") = 2.0);
    m.def(
        "equivariance_defect_json",
        [](const OperatorSpec& M, const Diffeo& phi, const SampledField& f, double p) {
            const DefectReport r = equivariance_defect(M, phi, f, p);
            return report_to_json(r, "").dump();
        },
        py::arg("op"), py::arg("diffeo"), py::arg("field"), py::arg("p") = 2.0);
    m.def(
        "check_contravariance", &check_contravariance, py::arg("psi"), py::arg("phi"), py::arg("field"),
        py::arg("p") = 2.0);

    m.def("standard_diffeos", [](const ChartDomain& c) {
        std::vector<Diffeo> out;
        for (const auto& spec : standard_diffeo_specs()) out.push_back(diffeo_from_record(spec.record, c));
        return out;
    });
    m.def("standard_fields", [](const ChartDomain& c) {
        std::vector<std::pair<std::string, SampledField>> out;
        for (const auto& ff : standard_scalar_fields()) out.emplace_back(ff.label, ff.make(c));
        for (const auto& ff : standard_vector_fields()) out.emplace_back(ff.label, ff.make(c));
        return out;
    });

    m.def("default_config_json", [] { return config_to_json(ExperimentConfig{}).dump(2); });
    m.def("normalize_config_json", [](const std::string& s) { return config_to_json(config_from_json(from_text(s))).dump(2); });
    m.def(
        "run_command",
        [](const std::string& command, const std::string& config_path, const std::filesystem::path& out_dir) {
            std::ostringstream console, log;
            RunOptions o;
            o.out_dir = out_dir;
            o.console = &console;
            o.log = &log;
            int code;
            {
                py::gil_scoped_release release;
                code = run_command(command, config_path, o);
            }
            return py::make_tuple(code, console.str(), log.str());
        },
        py::arg("command"), py::arg("config_path") = "", py::arg("out_dir") = "out");
    m.def("set_thread_count", &set_thread_count, py::arg("n"));
}
