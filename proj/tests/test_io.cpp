#include "diffeolab/bank.hpp"
#include "diffeolab/io.hpp"
#include "diffeolab/runner.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

using namespace diffeolab;

TEST_CASE("chart JSON round trip") {
    const ChartDomain b = ChartDomain::box({-1, 0}, {1, 3}, {17, 9}, 0.25);
    const Json j = chart_to_json(b);
    CHECK(j["kind"] == "box");
    CHECK(j["dim"] == 2);
    CHECK(j["boundary_margin"] == 0.25);
    CHECK(chart_from_json(j) == b);
    const ChartDomain t = ChartDomain::unit_torus(3, 8);
    CHECK(chart_from_json(chart_to_json(t)) == t);
    CHECK_THROWS_AS(chart_from_json(Json{{"kind", "sphere"}, {"dim", 1}, {"extent", {{0, 1}}}, {"resolution", {4}}}),
                    Error);
}

TEST_CASE("field binary layout: LE length, JSON header, LE float64 values") {
    const ChartDomain c = ChartDomain::unit_torus(2, 4);
    std::vector<double> v(32);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.1 * double(i) - 1.0;
    const SampledField f(c, FieldKind::Vector, v, InterpOrder::Linear);
    std::stringstream ss;
    write_field_binary(f, ss);
    const std::string bytes = ss.str();
    std::uint64_t len = 0;
    for (int i = 0; i < 8; ++i) len |= std::uint64_t(static_cast<unsigned char>(bytes[i])) << (8 * i);
    const Json header = Json::parse(bytes.substr(8, len));
    CHECK(header["kind"] == "vector");
    CHECK(header["interp"] == "linear");
    CHECK(header["components"] == 2);
    CHECK(bytes.size() == 8 + len + 8 * v.size());
    // Third value, read back by hand from the little-endian bytes.
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= std::uint64_t(static_cast<unsigned char>(bytes[8 + len + 16 + i])) << (8 * i);
    double third;
    std::memcpy(&third, &bits, 8);
    CHECK(third == v[2]);

    const SampledField g = read_field_binary(ss);
    CHECK(g.chart() == c);
    CHECK(g.kind() == FieldKind::Vector);
    CHECK(g.interp_order() == InterpOrder::Linear);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(g.values()[i] == v[i]);
}

TEST_CASE("truncated field files are rejected") {
    std::stringstream ss;
    write_field_binary(SampledField::zeros(ChartDomain::unit_torus(1, 8), FieldKind::Scalar), ss);
    std::string s = ss.str();
    s.resize(s.size() - 3);
    std::stringstream cut(s);
    CHECK_THROWS_AS(read_field_binary(cut), Error);
}

TEST_CASE("field CSV has coordinates then components") {
    const ChartDomain c = ChartDomain::unit_torus(1, 4);
    const SampledField f(c, FieldKind::Scalar, {1.0, 2.0, 3.0, 4.0});
    std::ostringstream os;
    write_field_csv(f, os);
    CHECK(os.str() == "x0,v0\n0,1\n0.25,2\n0.5,3\n0.75,4\n");
}

TEST_CASE("diffeo records rebuild the same maps") {
    const ChartDomain c = standard_chart(64);
    const Vec u = make_vec({0.47, 0.53});
    for (const auto& spec : standard_diffeo_specs()) {
        CAPTURE(spec.label);
        const Json j = diffeo_record_to_json(spec.record);
        const Json again = Json::parse(j.dump());
        const Diffeo a = spec.factory().make(c);
        const Diffeo b = diffeo_from_record(diffeo_record_from_json(again), c);
        CHECK(c.distance(a.forward(u), b.forward(u)) == 0.0);
        CHECK(diffeo_record_to_json(b.record()) == j);
    }
}

TEST_CASE("compositions serialize as an ordered constructor list") {
    const ChartDomain c = standard_chart(64);
    const Diffeo a = make_translation(c, make_vec({0.1, 0.0}));
    const Diffeo b = make_contraction(c, 2, 0.5, make_vec({0.5, 0.5}), 0.1);
    const Diffeo d = make_translation(c, make_vec({0.0, 0.2}));
    const Json j = diffeo_record_to_json(compose(d, compose(b, a)).record());
    REQUIRE(j["sequence"].size() == 3);
    CHECK(j["sequence"][0]["constructor"] == "translation");
    CHECK(j["sequence"][1]["constructor"] == "contraction");
    CHECK(j["sequence"][2]["shift"][1] == 0.2);
    const Json inv = diffeo_record_to_json(b.inverted().record());
    CHECK(inv["constructor"] == "inverse");
    CHECK(inv["of"]["n"] == 2);
}

TEST_CASE("operator JSON round trip") {
    for (const auto& M : {OperatorSpec::pointwise("tanh"), OperatorSpec::scalar_multiple(-1.5), OperatorSpec::blur(0.05),
                          OperatorSpec::local_average(0.1), OperatorSpec::sup(), OperatorSpec::vector_gain("relu")}) {
        const OperatorSpec back = operator_from_json(operator_to_json(M));
        CHECK(back.label == M.label);
        CHECK(operator_to_json(back) == operator_to_json(M));
    }
    CHECK(operator_to_json(OperatorSpec::blur(0.05))["params"]["sigma"] == 0.05);
}

TEST_CASE("report rows write nan as a string") {
    DefectReport r;
    r.operator_label = "pointwise(tanh)";
    r.diffeo_label = "translation";
    r.field_label = "bump";
    r.grid = {256, 256};
    r.defect_abs = 0.125;
    r.defect_rel = std::numeric_limits<double>::quiet_NaN();
    CHECK(std::string(report_csv_header()) == "operator,diffeo,field,p,grid,defect_abs,defect_rel,verdict");
    CHECK(report_csv_row(r, "consistent") == "pointwise(tanh),translation,bump,2,256x256,0.125,nan,consistent");
    CHECK(report_to_json(r, "consistent")["defect_rel"] == "nan");
    CHECK(format_double(0.1) == "0.10000000000000001");
}

TEST_CASE("syntax errors carry line and column") {
    try {
        parse_json_text("{\n  \"levels\": [1, 2,,\n}", "cfg.json");
        FAIL("expected a Config error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Config);
        CHECK(std::string(e.what()).find("cfg.json:2:") != std::string::npos);
    }
}

TEST_CASE("experiment configs round trip without loss") {
    const ExperimentConfig c;
    const Json j = config_to_json(c);
    const Json again = config_to_json(config_from_json(Json::parse(j.dump())));
    CHECK(again == j);
    CHECK(j["diffeos"].size() == 12);
    CHECK(j["fields"].size() == 6);
}

TEST_CASE("configs reject unknown keys and bad values") {
    CHECK_THROWS_AS(config_from_json(Json{{"levles", {64}}}), Error);
    CHECK_THROWS_AS(config_from_json(Json{{"p", {0.5}}}), Error);
    CHECK_THROWS_AS(config_from_json(Json{{"operators", {{{"kind", "pointwise"}, {"params", {{"rho", "nope"}}}}}}}),
                    Error);
    CHECK_THROWS_AS(config_from_json(Json{{"levels", "many"}}), Error);
    const ExperimentConfig c = config_from_json(Json{{"diffeos", "standard"}, {"p", 1}});
    CHECK(c.p_values == std::vector<double>{1.0});
}
