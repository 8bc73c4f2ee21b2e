#include "fdist/sequences.hpp"

#include <cmath>

#include <fmt/format.h>

namespace fdist {

namespace {

nlohmann::json complex_json(Complex z) { return {z.real(), z.imag()}; }

Complex complex_value(const nlohmann::json& params, const char* key, Complex fallback)
{
    if (!params.contains(key)) return fallback;
    const auto& v = params.at(key);
    if (v.is_number()) return {v.get<double>(), 0.0};
    return {v.at(0).get<double>(), v.at(1).get<double>()};
}

double oscillation_amplitude(const SequenceRecipe& r, int j)
{
    const double tj = 2.0 * kPi * j;
    return r.amplitude_mode == "vanishing" ? 1.0 / (tj * j) : 1.0 / tj;
}

nlohmann::json recipe_facts(const SequenceRecipe& r, const Mesh& mesh)
{
    const double area = mesh.total_area();
    nlohmann::json facts = nlohmann::json::object();
    switch (r.kind) {
    case RecipeKind::Constant:
        facts["gaps"] = 0.0;
        break;
    case RecipeKind::Oscillation:
        // f_z = 1 + cos/2, f_zbar = cos/2 for the decaying amplitude; integrals over whole periods.
        if (r.amplitude_mode == "decaying") {
            facts["fzbar_l2_gap_squared"] = area / 8.0;
            facts["df_l2_gap_squared"] = area / 4.0;
            facts["dirichlet_member_energy"] = 2.5 * area;
            facts["dirichlet_limit_energy"] = 2.0 * area;
            facts["dirichlet_energy_gap"] = 0.5 * area;
            facts["strong_convergence"] = false;
        } else {
            facts["fzbar_l2_gap_squared"] = "area / (8 j^2)";
            facts["strong_convergence"] = true;
        }
        facts["weak_limit"] = "identity";
        break;
    case RecipeKind::Mollified:
        facts["radius"] = fmt::format("{} / j", r.radius_scale);
        facts["c1_convergence"] = std::holds_alternative<RadialStretch>(r.map.form)
                                      ? "on compact subsets away from 0"
                                      : "on compact subsets";
        facts["strong_convergence"] = true;
        break;
    case RecipeKind::AffineDrift: {
        const double m = std::abs(r.b) / std::abs(r.a);
        facts["limit_hs_distortion"] = 2.0 * (1.0 + m * m) / (1.0 - m * m);
        facts["limit_jacobian"] = std::norm(r.a) - std::norm(r.b);
        facts["strong_convergence"] = true;
        break;
    }
    case RecipeKind::RadialStretchFamily: {
        const auto f = radial_stretch_facts(r.alpha);
        facts["limit_hs_distortion"] = f.hs_distortion;
        facts["limit_beltrami_modulus"] = f.beltrami_modulus;
        facts["limit_jacobian_integral"] = kPi;
        facts["strong_convergence"] = true;
        break;
    }
    }
    return facts;
}

} // namespace

const char* recipe_kind_name(RecipeKind kind)
{
    switch (kind) {
    case RecipeKind::Constant: return "constant";
    case RecipeKind::Oscillation: return "oscillation";
    case RecipeKind::Mollified: return "mollified";
    case RecipeKind::AffineDrift: return "affine_drift";
    case RecipeKind::RadialStretchFamily: return "radial_stretch_family";
    }
    return "unknown";
}

void SequenceRecipe::validate() const
{
    if (j_values.empty() && j_max < 2) throw ConfigError("sequence recipe: j_max must be >= 2");
    if (!j_values.empty()) {
        if (j_values.size() < 2) throw ConfigError("sequence recipe: need at least two members");
        for (std::size_t i = 0; i < j_values.size(); ++i) {
            if (j_values[i] < 1) throw ConfigError("sequence recipe: j values must be >= 1");
            if (i > 0 && j_values[i] <= j_values[i - 1])
                throw ConfigError("sequence recipe: j values must be increasing");
        }
    }
    switch (kind) {
    case RecipeKind::Oscillation:
        if (amplitude_mode != "decaying" && amplitude_mode != "vanishing")
            throw ConfigError("oscillation amplitude_mode must be 'decaying' or 'vanishing'");
        break;
    case RecipeKind::Mollified:
        if (!(radius_scale > 0.0)) throw ConfigError("mollified radius_scale must be > 0");
        break;
    case RecipeKind::AffineDrift:
        for (int j : indices())
            if (!(std::abs(b + db / double(j)) < std::abs(a + da / double(j))))
                throw ConfigError(fmt::format("affine_drift member {} is not orientation preserving", j));
        if (!(std::abs(b) < std::abs(a))) throw ConfigError("affine_drift limit is not orientation preserving");
        break;
    case RecipeKind::RadialStretchFamily:
        for (int j : indices())
            if (!(alpha + dalpha / j > 0.0)) throw ConfigError("radial_stretch_family exponents must be positive");
        if (!(alpha > 0.0)) throw ConfigError("radial_stretch_family limit exponent must be positive");
        break;
    case RecipeKind::Constant: break;
    }
}

std::vector<int> SequenceRecipe::indices() const
{
    if (!j_values.empty()) return j_values;
    std::vector<int> out(std::max(j_max, 0));
    for (int j = 1; j <= j_max; ++j) out[j - 1] = j;
    return out;
}

AnalyticMap member_map(const SequenceRecipe& r, int j)
{
    switch (r.kind) {
    case RecipeKind::Constant: return r.map;
    case RecipeKind::Oscillation: return {Oscillation{double(j), oscillation_amplitude(r, j)}};
    case RecipeKind::Mollified: return make_mollified(r.map, r.radius_scale / j);
    case RecipeKind::AffineDrift: return make_affine(r.a + r.da / double(j), r.b + r.db / double(j));
    case RecipeKind::RadialStretchFamily: return make_radial_stretch(r.alpha + r.dalpha / j);
    }
    throw InternalError("unknown recipe kind");
}

AnalyticMap limit_map(const SequenceRecipe& r)
{
    switch (r.kind) {
    case RecipeKind::Constant:
    case RecipeKind::Mollified: return r.map;
    case RecipeKind::Oscillation: return make_affine({1.0, 0.0}, {0.0, 0.0});
    case RecipeKind::AffineDrift: return make_affine(r.a, r.b);
    case RecipeKind::RadialStretchFamily: return make_radial_stretch(r.alpha);
    }
    throw InternalError("unknown recipe kind");
}

SequenceHandle generate(const SequenceRecipe& recipe, MeshPtr mesh)
{
    recipe.validate();
    if (recipe.kind == RecipeKind::Oscillation && mesh->domain != DomainKind::Rectangle)
        throw ConfigError("oscillation sequences are defined on rectangle meshes");
    if (recipe.kind == RecipeKind::RadialStretchFamily && mesh->domain != DomainKind::Disk)
        throw ConfigError("radial_stretch_family sequences are defined on disk meshes");

    SequenceHandle seq;
    seq.mesh = mesh;
    seq.indices = recipe.indices();
    for (int j : seq.indices) seq.members.push_back(sample_analytic(mesh, member_map(recipe, j)));
    seq.limit = sample_analytic(mesh, limit_map(recipe));
    seq.metadata = {{"recipe", recipe_to_json(recipe)}, {"facts", recipe_facts(recipe, *mesh)}};
    return seq;
}

Complex RadialStretchFacts::map(Complex z) const
{
    const double r = std::abs(z);
    return r > 0.0 ? z * std::pow(r, alpha - 1.0) : Complex{};
}

Complex RadialStretchFacts::fz(Complex z) const { return 0.5 * (alpha + 1.0) * std::pow(std::abs(z), alpha - 1.0); }

Complex RadialStretchFacts::fzbar(Complex z) const
{
    const double r = std::abs(z);
    if (r == 0.0) return {};
    return 0.5 * (alpha - 1.0) * std::pow(r, alpha - 1.0) * (z / std::conj(z));
}

double RadialStretchFacts::jacobian(Complex z) const { return alpha * std::pow(std::abs(z), 2.0 * alpha - 2.0); }

RadialStretchFacts radial_stretch_facts(double alpha)
{
    if (!(alpha > 0.0)) throw ConfigError("radial stretch exponent must be positive");
    RadialStretchFacts f;
    f.alpha = alpha;
    f.hs_distortion = (alpha * alpha + 1.0) / alpha;
    f.beltrami_modulus = std::abs(alpha - 1.0) / (alpha + 1.0);
    return f;
}

nlohmann::json recipe_to_json(const SequenceRecipe& r)
{
    nlohmann::json params = nlohmann::json::object();
    switch (r.kind) {
    case RecipeKind::Constant: params["map"] = analytic_to_json(r.map); break;
    case RecipeKind::Oscillation: params["amplitude_mode"] = r.amplitude_mode; break;
    case RecipeKind::Mollified:
        params["target"] = analytic_to_json(r.map);
        params["radius_scale"] = r.radius_scale;
        break;
    case RecipeKind::AffineDrift:
        params["a"] = complex_json(r.a);
        params["b"] = complex_json(r.b);
        params["da"] = complex_json(r.da);
        params["db"] = complex_json(r.db);
        break;
    case RecipeKind::RadialStretchFamily:
        params["alpha"] = r.alpha;
        params["dalpha"] = r.dalpha;
        break;
    }
    return {{"kind", recipe_kind_name(r.kind)}, {"params", params}, {"j_max", r.j_max}, {"j_values", r.indices()}};
}

SequenceRecipe recipe_from_json(const nlohmann::json& doc)
{
    try {
        SequenceRecipe r;
        const std::string kind = doc.at("kind").get<std::string>();
        const nlohmann::json params = doc.value("params", nlohmann::json::object());
        if (kind == "constant") {
            r.kind = RecipeKind::Constant;
            if (params.contains("map")) r.map = analytic_from_json(params.at("map"));
        } else if (kind == "oscillation") {
            r.kind = RecipeKind::Oscillation;
            r.amplitude_mode = params.value("amplitude_mode", r.amplitude_mode);
        } else if (kind == "mollified") {
            r.kind = RecipeKind::Mollified;
            r.map = params.contains("target") ? analytic_from_json(params.at("target")) : make_radial_stretch(2.0);
            r.radius_scale = params.value("radius_scale", r.radius_scale);
        } else if (kind == "affine_drift") {
            r.kind = RecipeKind::AffineDrift;
            r.a = complex_value(params, "a", r.a);
            r.b = complex_value(params, "b", r.b);
            r.da = complex_value(params, "da", r.da);
            r.db = complex_value(params, "db", r.db);
        } else if (kind == "radial_stretch_family") {
            r.kind = RecipeKind::RadialStretchFamily;
            r.alpha = params.value("alpha", r.alpha);
            r.dalpha = params.value("dalpha", r.dalpha);
        } else {
            throw ConfigError("unknown sequence kind '" + kind + "'");
        }
        r.j_max = doc.value("j_max", r.j_max);
        r.j_values = doc.value("j_values", std::vector<int>{});
        if (!r.j_values.empty() && doc.contains("j_max") && r.j_values.back() != r.j_max)
            throw ConfigError("sequence recipe: j_values must end at j_max");
        if (!r.j_values.empty()) r.j_max = r.j_values.back();
        r.validate();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed sequence recipe: ") + e.what());
    }
}

} // namespace fdist
