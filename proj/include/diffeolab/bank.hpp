#pragma once

#include "diffeolab/analysis.hpp"

#include <string>
#include <vector>

namespace diffeolab {

/// One summand of a generated test field. "bump" is a scalar bump, or a
/// vector bump when `direction` is set; "swirl" is the rotational field
/// amplitude * bump(|x|/radius) * x_perp / radius (2-D only).
struct FieldTerm {
    std::string shape = "bump";
    Vec center;
    double radius = 0.1;
    double amplitude = 1.0;
    Vec direction;
};

/// Chart-independent test field: the sum of its terms, in order.
struct FieldSpec {
    std::string label;
    FieldKind kind = FieldKind::Scalar;
    std::vector<FieldTerm> terms;

    SampledField make(const ChartDomain& chart) const;
    FieldFactory factory() const;
};

struct DiffeoSpec {
    std::string label;
    DiffeoRecord record;

    DiffeoFactory factory() const;
};

/// The twelve maps used by the falsification suites on the unit 2-torus:
/// contractions (and an inverse), point transports, rotation conjugations,
/// axis stretches, a translation and two compositions.
std::vector<DiffeoSpec> standard_diffeo_specs();
std::vector<DiffeoFactory> standard_diffeo_bank();

/// Smooth scalar test fields. Signed fields use bumps with disjoint supports,
/// so relu and abs of them stay smooth.
std::vector<FieldSpec> standard_scalar_field_specs();
std::vector<FieldSpec> standard_vector_field_specs();
std::vector<FieldFactory> standard_scalar_fields();
std::vector<FieldFactory> standard_vector_fields();

/// Unit torus [0,1)^2 with n samples per axis.
ChartDomain standard_chart(int n);

}  // namespace diffeolab
