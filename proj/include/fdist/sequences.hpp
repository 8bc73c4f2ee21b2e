#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fdist/convergence.hpp"

namespace fdist {

enum class RecipeKind { Constant, Oscillation, Mollified, AffineDrift, RadialStretchFamily };

/// Closed-form mapping sequence f_j, j in j_values (default 1..j_max).
struct SequenceRecipe {
    RecipeKind kind = RecipeKind::Constant;
    /// constant: the map; mollified: the target.
    AnalyticMap map = make_affine({1.0, 0.0}, {0.0, 0.0});
    /// oscillation: "decaying" amplitude 1/(2 pi j) or "vanishing" 1/(2 pi j^2).
    std::string amplitude_mode = "decaying";
    /// mollified: radius_j = radius_scale / j.
    double radius_scale = 1.0;
    /// affine_drift: a_j = a + da/j, b_j = b + db/j; limit (a, b).
    Complex a{1.0, 0.0}, b{0.2, 0.0}, da{0.0, 0.0}, db{0.1, 0.0};
    /// radial_stretch_family: alpha_j = alpha + dalpha/j; limit alpha.
    double alpha = 2.0, dalpha = 1.0;
    int j_max = 8;
    std::vector<int> j_values;

    void validate() const;
    std::vector<int> indices() const;
};

const char* recipe_kind_name(RecipeKind kind);

/// Samples every member and the analytic limit on `mesh` and attaches the known
/// facts as metadata. ConfigError on recipe/domain mismatch.
SequenceHandle generate(const SequenceRecipe& recipe, MeshPtr mesh);

/// Closed-form map of member j (for oracles and tests).
AnalyticMap member_map(const SequenceRecipe& recipe, int j);
AnalyticMap limit_map(const SequenceRecipe& recipe);

struct RadialStretchFacts {
    double alpha = 1.0;
    double hs_distortion = 2.0;  // (alpha^2 + 1) / alpha
    double beltrami_modulus = 0.0;
    Complex map(Complex z) const;
    Complex fz(Complex z) const;
    Complex fzbar(Complex z) const;
    double jacobian(Complex z) const;
};

/// Throws ConfigError for alpha <= 0.
RadialStretchFacts radial_stretch_facts(double alpha);

nlohmann::json recipe_to_json(const SequenceRecipe& recipe);
SequenceRecipe recipe_from_json(const nlohmann::json& doc);

} // namespace fdist
