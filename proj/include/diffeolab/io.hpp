#pragma once

#include "diffeolab/analysis.hpp"
#include "diffeolab/diffeo.hpp"
#include "diffeolab/fields.hpp"
#include "diffeolab/geometry.hpp"
#include "diffeolab/operators.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>

namespace diffeolab {

using Json = nlohmann::ordered_json;

/// %.17g, with "nan", "inf" and "-inf" for the non-finite values.
std::string format_double(double x);
/// Numbers stay numbers; non-finite values become the strings above.
Json number_json(double x);
double number_from_json(const Json& j);

/// Parses a JSON document; syntax errors become Config errors carrying the
/// line and column of the offending byte.
Json parse_json_text(const std::string& text, const std::string& source = "<input>");
Json read_json_file(const std::filesystem::path& path);

Json chart_to_json(const ChartDomain& chart);
ChartDomain chart_from_json(const Json& j);

/// Binary layout: 8-byte little-endian header length, a JSON header with the
/// chart, kind, interpolation order and component count, then the node values
/// as little-endian float64 in row-major node order.
void write_field_binary(const SampledField& f, std::ostream& out);
SampledField read_field_binary(std::istream& in);
void save_field(const SampledField& f, const std::filesystem::path& path);
SampledField load_field(const std::filesystem::path& path);

/// One row per node: coordinates x0..x{d-1}, then the components v0...
void write_field_csv(const SampledField& f, std::ostream& out);

/// {"constructor": ..., params...}. Compositions become
/// {"constructor": "compose", "sequence": [...]} in application order and
/// inverses {"constructor": "inverse", "of": {...}}.
Json diffeo_record_to_json(const DiffeoRecord& record);
DiffeoRecord diffeo_record_from_json(const Json& j);
/// Rebuilds the map on `chart`. Flowbox charts depend on a sampled field and
/// cannot be rebuilt from their record.
Diffeo diffeo_from_record(const DiffeoRecord& record, const ChartDomain& chart);

/// {"label": ..., "kind": ..., "params": {...}}.
Json operator_to_json(const OperatorSpec& M);
OperatorSpec operator_from_json(const Json& j);

Json report_to_json(const DefectReport& r, const std::string& verdict);
/// Grid sizes joined with 'x', e.g. "256x256".
std::string grid_string(const std::vector<int>& grid);
const char* report_csv_header();
std::string report_csv_row(const DefectReport& r, const std::string& verdict);

}  // namespace diffeolab
