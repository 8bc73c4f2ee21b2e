#pragma once

#include <memory>
#include <string>
#include <variant>

#include "json.hpp"

#include "fdist/common.hpp"

namespace fdist {

struct AnalyticMap;

/// a*z + b*conj(z)
struct AffineMap {
    Complex a{1.0, 0.0};
    Complex b{0.0, 0.0};
};

/// z |z|^(alpha - 1)
struct RadialStretch {
    double alpha = 1.0;
};

/// z + amplitude * sin(2 pi j Re z)
struct Oscillation {
    double frequency = 1.0;  // j
    double amplitude = 0.0;
};

/// z + c z^2 conj(z) + d z conj(z)^2, orientation preserving on the unit disk
/// when |c| + |d| < 1/3.
struct CubicMap {
    double c = 0.0;
    double d = 0.0;
};

/// Convolution of `target` with the bump (3/pi)(1 - |y|^2)^2 scaled to `radius`.
struct Mollified {
    std::shared_ptr<const AnalyticMap> target;
    double radius = 0.0;
};

struct AnalyticMap {
    std::variant<AffineMap, RadialStretch, Oscillation, CubicMap, Mollified> form;
};

Complex evaluate(const AnalyticMap& map, Complex z);

/// Tag used in JSON: "affine", "radial_stretch", "oscillation", "cubic", "mollified".
std::string tag_of(const AnalyticMap& map);

nlohmann::json analytic_to_json(const AnalyticMap& map);
AnalyticMap analytic_from_json(const nlohmann::json& doc);

AnalyticMap make_affine(Complex a, Complex b);
AnalyticMap make_radial_stretch(double alpha);
AnalyticMap make_mollified(AnalyticMap target, double radius);

} // namespace fdist
