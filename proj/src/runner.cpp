#include "fdist/runner.hpp"

#include <chrono>
#include <fstream>
#include <functional>
#include <sstream>

#include <Eigen/Core>
#include <fmt/format.h>

#include "fdist/hopf.hpp"
#include "fdist/minimize.hpp"
#include "fdist/sequences.hpp"
#include "result_schema.hpp"

namespace fdist {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

/// Thrown when a run finished but must report a numerical failure (stall).
class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

json real(double v)
{
    if (std::isfinite(v)) return v;
    return v > 0 ? json("inf") : v < 0 ? json("-inf") : json("nan");
}

struct Context {
    json config;
    std::uint64_t seed = 0;
    fs::path out;
    json result;
    std::vector<std::string> stalls;
};

std::ofstream open_output(const fs::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    return out;
}

void write_json(const fs::path& path, const json& doc)
{
    auto out = open_output(path);
    out << doc.dump(2) << '\n';
}

const json& section(const Context& ctx, const char* key)
{
    if (!ctx.config.contains(key)) throw ConfigError(fmt::format("config is missing the '{}' section", key));
    return ctx.config.at(key);
}

json optional_section(const Context& ctx, const char* key)
{
    return ctx.config.contains(key) ? ctx.config.at(key) : json::object();
}

MeshPtr build_domain(const json& d)
{
    const std::string kind = d.value("kind", "disk");
    if (kind == "disk") {
        const int level = d.value("level", 4);
        if (level < 0 || level > kMaxDiskLevel)
            throw ConfigError(fmt::format("disk level must lie in [0, {}]", kMaxDiskLevel));
        return std::make_shared<const Mesh>(build_disk_mesh(level));
    }
    if (kind == "square") {
        const int level = d.value("level", 4);
        const int base = d.value("base", 16);
        if (level < 0 || level > 8 || base < 1) throw ConfigError("square level must lie in [0, 8] and base >= 1");
        return std::make_shared<const Mesh>(build_square_mesh(level, base));
    }
    if (kind == "rectangle") {
        const auto lo = d.value("lo", std::vector<double>{0.0, 0.0});
        const auto hi = d.value("hi", std::vector<double>{1.0, 1.0});
        if (lo.size() != 2 || hi.size() != 2) throw ConfigError("rectangle corners must be [x, y] pairs");
        return std::make_shared<const Mesh>(
            build_rect_mesh(d.value("nx", 16), d.value("ny", 16), {lo[0], lo[1]}, {hi[0], hi[1]}));
    }
    throw ConfigError("unknown domain kind '" + kind + "'");
}

json mesh_summary(const Mesh& mesh)
{
    return {{"domain", mesh.domain == DomainKind::Disk ? "disk" : "rectangle"},
            {"level", mesh.refinement_level},
            {"nodes", mesh.node_count()},
            {"triangles", mesh.triangle_count()},
            {"boundary_nodes", mesh.boundary_nodes.size()},
            {"total_area", mesh.total_area()},
            {"max_edge_length", mesh.max_edge_length()}};
}

json distortion_json(const FiniteDistortionReport& r)
{
    return {{"nonpositive_count", r.nonpositive_count},
            {"nonpositive_area", r.nonpositive_area},
            {"ess_sup_op_distortion", real(r.ess_sup_op_distortion)},
            {"mean_hs_distortion", real(r.mean_hs_distortion)},
            {"mean_jacobian", r.mean_jacobian},
            {"finite_distortion", r.finite_distortion}};
}

json minimization_json(const MinimizeResult& r, const BoundaryData& boundary)
{
    json doc = {{"energy", real(r.energy())},
                {"initial_energy", real(r.trace.front().energy)},
                {"iterations", r.trace.back().iteration},
                {"converged", r.converged},
                {"stalled", r.stalled},
                {"grad_norm", r.trace.back().grad_norm},
                {"min_jacobian", r.trace.back().min_jacobian},
                {"jacobian_floor", r.jacobian_floor}};
    if (boundary.kind == BoundaryKind::Identity) {
        double d = 0.0;
        const Mesh& mesh = r.mapping.mesh();
        for (std::size_t v = 0; v < mesh.node_count(); ++v)
            d = std::max(d, std::abs(r.mapping.values()[v] - mesh.nodes[v]));
        doc["max_distance_from_identity"] = d;
    }
    return doc;
}

json residual_json(const HolomorphyResidual& r, const HopfField& field)
{
    return {{"l1", r.l1},
            {"l2", r.l2},
            {"fitted_vertices", r.fitted_vertices},
            {"skipped_vertices", r.skipped_vertices},
            {"fitted_area", r.fitted_area},
            {"field_l1_norm", l1_norm(field)}};
}

HopfWeight hopf_weight_of(const FunctionalSpec& spec)
{
    return spec.weight == WeightKind::Hyperbolic ? HopfWeight::Hyperbolic : HopfWeight::None;
}

MinimizeConfig minimize_config(const Context& ctx)
{
    json doc = optional_section(ctx, "minimize");
    if (!doc.contains("seed")) doc["seed"] = ctx.seed;
    return minimize_config_from_json(doc);
}

void cmd_mesh(Context& ctx)
{
    const MeshPtr mesh = build_domain(section(ctx, "domain"));
    ctx.result["mesh"] = mesh_summary(*mesh);
    write_json(ctx.out / "mesh.json", mesh_to_json(*mesh));
}

void cmd_minimize(Context& ctx)
{
    const MeshPtr mesh = build_domain(section(ctx, "domain"));
    const FunctionalSpec spec = spec_from_json(section(ctx, "functional"));
    const BoundaryData boundary = boundary_from_json(optional_section(ctx, "boundary"));
    const MinimizeConfig config = minimize_config(ctx);
    ctx.result["mesh"] = mesh_summary(*mesh);
    ctx.result["functional"] = spec_to_json(spec);

    const MinimizeResult r = minimize_energy(spec, mesh, boundary, config);
    const DerivedField d = wirtinger_derivatives(r.mapping);
    ctx.result["minimization"] = minimization_json(r, boundary);
    ctx.result["distortion"] = distortion_json(finite_distortion_report(d));
    {
        auto out = open_output(ctx.out / "trace.csv");
        write_trace_csv(out, r.trace);
    }
    {
        auto out = open_output(ctx.out / "derived.csv");
        write_derived_csv(out, d);
    }
    write_json(ctx.out / "mapping.json", mapping_to_json(r.mapping));
    if (r.stalled) ctx.stalls.push_back("minimize: line search stalled before the gradient tolerance");
}

void cmd_sweep(Context& ctx)
{
    const MeshPtr mesh = build_domain(section(ctx, "domain"));
    const json& sw = section(ctx, "sweep");
    const FunctionalSpec base = ctx.config.contains("functional") ? spec_from_json(ctx.config.at("functional"))
                                                                  : make_spec(Family::TruncExp, 1.0, 0);
    const double p = sw.value("p", base.p);
    const auto n_list = sw.value("N_list", std::vector<int>{1, 2, 4, 8, 16});
    const BoundaryData boundary = boundary_from_json(optional_section(ctx, "boundary"));
    const MinimizeConfig config = minimize_config(ctx);
    ctx.result["mesh"] = mesh_summary(*mesh);

    const auto entries = truncation_sweep(p, n_list, mesh, boundary, config, base);
    const HopfWeight weight = hopf_weight_of(base);
    const auto interior = mesh->interior_triangles();

    json rows = json::array();
    std::vector<double> energies, gaps;
    std::optional<HopfField> previous;
    auto csv = open_output(ctx.out / "sweep.csv");
    csv << "N,energy,iterations,converged,stalled,hopf_l1_norm,holomorphy_l1,cauchy_gap\n";
    for (const auto& e : entries) {
        const DerivedField d = wirtinger_derivatives(e.result.mapping);
        HopfField psi = ahlfors_hopf(d, p, e.N, weight);
        const HolomorphyResidual res = holomorphy_residual(psi);
        double gap = std::numeric_limits<double>::quiet_NaN();
        if (previous) {
            gap = sup_gap(*previous, psi, interior);
            gaps.push_back(gap);
        }
        energies.push_back(e.result.energy());
        rows.push_back({{"N", e.N},
                        {"energy", real(e.result.energy())},
                        {"converged", e.result.converged},
                        {"stalled", e.result.stalled},
                        {"iterations", e.result.trace.back().iteration},
                        {"min_jacobian", e.result.trace.back().min_jacobian},
                        {"hopf_l1_norm", l1_norm(psi)},
                        {"holomorphy", residual_json(res, psi)}});
        csv << fmt::format("{},{:.17g},{},{},{},{:.17g},{:.17g},{:.17g}\n", e.N, e.result.energy(),
                           e.result.trace.back().iteration, int(e.result.converged), int(e.result.stalled),
                           l1_norm(psi), res.l1, gap);
        if (e.result.stalled) ctx.stalls.push_back(fmt::format("sweep: N = {} stalled", e.N));
        previous = std::move(psi);
    }
    bool monotone = true;
    for (std::size_t i = 1; i < energies.size(); ++i) monotone = monotone && energies[i] >= energies[i - 1];
    json sweep = {{"p", p}, {"entries", rows}, {"energies_monotone", monotone}, {"cauchy_gaps", json::array()}};
    for (double g : gaps) sweep["cauchy_gaps"].push_back(real(g));

    if (sw.value("diagnose_after", false)) {
        // The limit of the truncations: the ExpP problem with the same weights.
        FunctionalSpec limit_fn = base;
        limit_fn.family = Family::ExpP;
        limit_fn.p = p;
        const MinimizeResult limit = minimize_energy(limit_fn, mesh, boundary, config, entries.back().result.mapping);
        if (limit.stalled) ctx.stalls.push_back("sweep: limit problem stalled");
        sweep["limit"] = minimization_json(limit, boundary);

        SequenceHandle seq;
        seq.mesh = mesh;
        for (const auto& e : entries) {
            seq.indices.push_back(e.N);
            seq.truncation_orders.push_back(e.N);
            seq.members.push_back(e.result.mapping);
        }
        seq.limit = limit.mapping;
        FunctionalSpec spec = base;
        spec.family = Family::TruncExp;
        spec.p = p;
        json dopt = optional_section(ctx, "diagnose");
        if (!dopt.contains("seed")) dopt["seed"] = ctx.seed;
        const ConvergenceReport rep = radon_riesz_diagnose(spec, seq, diagnose_options_from_json(dopt));
        ctx.result["diagnosis"] = report_to_json(rep);
        auto gcsv = open_output(ctx.out / "gaps.csv");
        write_convergence_csv(gcsv, rep);
    }
    ctx.result["functional"] = spec_to_json(base);
    ctx.result["sweep"] = sweep;
}

void cmd_diagnose(Context& ctx)
{
    const MeshPtr mesh = build_domain(section(ctx, "domain"));
    const FunctionalSpec spec = spec_from_json(section(ctx, "functional"));
    const SequenceRecipe recipe = recipe_from_json(section(ctx, "sequence"));
    json dopt = optional_section(ctx, "diagnose");
    if (!dopt.contains("seed")) dopt["seed"] = ctx.seed;
    const DiagnoseOptions options = diagnose_options_from_json(dopt);
    ctx.result["mesh"] = mesh_summary(*mesh);
    ctx.result["functional"] = spec_to_json(spec);

    const SequenceHandle seq = generate(recipe, mesh);
    ctx.result["sequence"] = seq.metadata;
    const ConvergenceReport rep = radon_riesz_diagnose(spec, seq, options);
    ctx.result["diagnosis"] = report_to_json(rep);
    ctx.result["lsc"] = lsc_to_json(lsc_check(spec, seq));
    auto out = open_output(ctx.out / "gaps.csv");
    write_convergence_csv(out, rep);
}

void cmd_hopf(Context& ctx)
{
    const MeshPtr mesh = build_domain(section(ctx, "domain"));
    const json& h = section(ctx, "hopf");
    ctx.result["mesh"] = mesh_summary(*mesh);

    MappingField mapping;
    if (h.contains("map")) {
        mapping = sample_analytic(mesh, analytic_from_json(h.at("map")));
    } else {
        const FunctionalSpec spec = spec_from_json(section(ctx, "functional"));
        const BoundaryData boundary = boundary_from_json(optional_section(ctx, "boundary"));
        const MinimizeResult r = minimize_energy(spec, mesh, boundary, minimize_config(ctx));
        ctx.result["functional"] = spec_to_json(spec);
        ctx.result["minimization"] = minimization_json(r, boundary);
        if (r.stalled) ctx.stalls.push_back("hopf: minimization stalled");
        mapping = r.mapping;
    }
    const DerivedField d = wirtinger_derivatives(mapping);
    const std::string kind = h.value("kind", "ahlfors_hopf");
    const double p = h.value("p", 1.0);
    const std::string weight = h.value("weight", "none");
    if (weight != "none" && weight != "hyperbolic") throw ConfigError("hopf weight must be 'none' or 'hyperbolic'");
    std::optional<int> N;
    if (h.contains("N") && !h.at("N").is_null()) N = h.at("N").get<int>();

    HopfField field;
    if (kind == "hopf") field = hopf_differential(d, p);
    else if (kind == "ahlfors_hopf")
        field = ahlfors_hopf(d, p, N, weight == "hyperbolic" ? HopfWeight::Hyperbolic : HopfWeight::None);
    else throw ConfigError("hopf kind must be 'hopf' or 'ahlfors_hopf'");

    const HolomorphyResidual res = holomorphy_residual(field);
    std::size_t degenerate = 0;
    for (char c : field.degenerate) degenerate += c != 0;
    ctx.result["hopf"] = {{"kind", kind},
                          {"p", p},
                          {"N", N ? json(*N) : json(nullptr)},
                          {"weight", weight},
                          {"degenerate_triangles", degenerate},
                          {"residual", residual_json(res, field)}};
    auto out = open_output(ctx.out / "hopf.csv");
    write_hopf_csv(out, field);
}

void cmd_oracle(Context& ctx)
{
    const json o = optional_section(ctx, "oracle");
    const std::size_t n = o.value("samples", std::size_t{100000});
    const double p_rr = o.value("p_RR", 2.0);
    const double s = o.contains("s") ? o.at("s").get<double>() : default_s(p_rr);
    if (n == 0) throw ConfigError("oracle samples must be > 0");
    if (!(p_rr > 1.0)) throw ConfigError("oracle p_RR must be > 1");
    const std::uint64_t seed = ctx.seed;

    json checks = json::array();
    bool all_expected = true;
    auto add = [&](const std::string& name, const ProbeReport& r, bool expect_violations) {
        const bool ok = expect_violations ? r.violations > 0 : r.violations == 0;
        all_expected = all_expected && ok;
        checks.push_back(
            {{"name", name}, {"expect_violations", expect_violations}, {"report", probe_to_json(r)}, {"as_expected", ok}});
    };

    add("polyconvex_lower_bound", polyconvex_sweep(n, seed), false);

    ConvexityProbeOptions po;
    po.s = s;
    po.n_samples = n;
    po.min_distortion = 2.0;
    po.seed = seed;
    auto convexity = [&](const std::string& name, const FunctionalSpec& spec, bool expect_fail) {
        const auto r = convexity_probe(spec, po);
        ProbeReport merged = r.phi;
        merged.violations += r.phi_weighted.violations;
        merged.worst = std::max(r.phi.worst, r.phi_weighted.worst);
        add("convexity/" + name, merged, expect_fail);
    };
    convexity("lp_mean_p2", make_spec(Family::LpMean, 2.0), false);
    convexity("lp_mean_p1", make_spec(Family::LpMean, 1.0), false);
    convexity("exp_p_p1", make_spec(Family::ExpP, 1.0), false);
    for (int N : {1, 2, 4, 8, 16}) convexity(fmt::format("trunc_exp_p1_N{}", N), make_spec(Family::TruncExp, 1.0, N), false);
    for (int N : {2, 4, 8, 16}) {
        FunctionalSpec root = make_spec(Family::TruncExp, 1.0, N);
        root.jac_exp = 1.0;
        root.outer_exp = 0.5;
        convexity(fmt::format("sqrt_trunc_exp_jacobian_N{}", N), root, false);
    }
    // Controls: y^s is concave, and the planted -x^2 is concave in x.
    convexity("control/trunc_exp_N0", make_spec(Family::TruncExp, 1.0, 0), true);
    convexity("control/dirichlet", make_spec(Family::Dirichlet), true);
    {
        FunctionalSpec planted = make_spec(Family::Custom);
        planted.custom = [](double x, double) { return -x * x; };
        convexity("control/planted_negative_square", planted, true);
    }

    for (double p : {0.5, 1.0, 2.0})
        add(fmt::format("monotone_truncation_p{}", p), monotone_truncation_check(p, 20, n, seed), false);
    for (auto [name, spec] : {std::pair{"lp_mean_p2", make_spec(Family::LpMean, 2.0)},
                              std::pair{"exp_p_p1", make_spec(Family::ExpP, 1.0)},
                              std::pair{"trunc_exp_p1_N8", make_spec(Family::TruncExp, 1.0, 8)},
                              std::pair{"dirichlet", make_spec(Family::Dirichlet)}})
        add(fmt::format("monotone_in_x/{}", name), monotonicity_in_x_check(spec, n, seed), false);
    const double p_prime = p_rr / (p_rr - 1.0);
    add("concavity_lemma", concavity_probe(s, p_prime, n, seed), false);

    ctx.result["oracle"] = {{"samples", n}, {"s", s}, {"p_RR", p_rr}, {"checks", checks}, {"all_expected", all_expected}};
    auto out = open_output(ctx.out / "oracle.csv");
    out << "name,samples,violations,worst,as_expected\n";
    for (const auto& c : checks)
        out << fmt::format("{},{},{},{:.17g},{}\n", c.at("name").get<std::string>(),
                           c.at("report").at("samples").get<std::size_t>(),
                           c.at("report").at("violations").get<std::size_t>(),
                           c.at("report").at("worst").get<double>(), int(c.at("as_expected").get<bool>()));
}

const std::map<std::string, std::function<void(Context&)>>& commands()
{
    static const std::map<std::string, std::function<void(Context&)>> table = {
        {"mesh", cmd_mesh},       {"minimize", cmd_minimize}, {"sweep", cmd_sweep},
        {"diagnose", cmd_diagnose}, {"hopf", cmd_hopf},       {"oracle", cmd_oracle}};
    return table;
}

json versions()
{
    return {{"fdist", kVersion},
            {"compiler", __VERSION__},
            {"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
            {"fmt", FMT_VERSION},
            {"nlohmann_json", fmt::format("{}.{}.{}", NLOHMANN_JSON_VERSION_MAJOR, NLOHMANN_JSON_VERSION_MINOR,
                                          NLOHMANN_JSON_VERSION_PATCH)}};
}

} // namespace

nlohmann::json load_config(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
}

const char* result_schema() { return kResultSchema; }

const char* version() { return kVersion; }

int run(const RunRequest& request)
{
    const auto t0 = std::chrono::steady_clock::now();
    Context ctx;
    ctx.config = request.config;
    ctx.out = request.out_dir;
    json manifest = {{"config", request.config},
                     {"config_path", request.config_path},
                     {"versions", versions()},
                     {"threads", request.threads}};

    int code = kExitOk;
    std::string status = "ok", reason;
    std::string command = "unknown";
    try {
        if (!request.load_error.empty()) throw ConfigError(request.load_error);
        if (!ctx.config.is_object()) throw ConfigError("config must be a JSON object");
        if (request.threads < 1) throw ConfigError("--threads must be >= 1");
        if (request.seed) ctx.seed = *request.seed;
        else {
            const auto& s = ctx.config.value("seed", json(0));
            if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0))
                throw ConfigError("seed must be a non-negative integer");
            ctx.seed = s.get<std::uint64_t>();
        }
        command = ctx.config.value("command", "unknown");
        const auto it = commands().find(command);
        if (it == commands().end()) throw ConfigError("unknown command '" + command + "'");
        std::error_code ec;
        fs::create_directories(ctx.out, ec);
        if (ec || !fs::is_directory(ctx.out)) throw ConfigError("cannot create output directory " + ctx.out.string());
        set_thread_count(request.threads);
        it->second(ctx);
        if (!ctx.stalls.empty()) throw NumericalFailure(ctx.stalls.front());
    } catch (const ConfigError& e) {
        code = kExitValidation;
        status = "validation_error";
        reason = e.what();
    } catch (const json::exception& e) {
        code = kExitValidation;
        status = "validation_error";
        reason = std::string("malformed config: ") + e.what();
    } catch (const DomainError& e) {
        code = kExitNumerical;
        status = "numerical_failure";
        reason = e.what();
    } catch (const NumericalFailure& e) {
        code = kExitNumerical;
        status = "numerical_failure";
        reason = e.what();
    } catch (const InternalError& e) {
        code = kExitNumerical;
        status = "numerical_failure";
        reason = std::string("internal error: ") + e.what();
    }

    json result = {{"schema_version", 1}, {"command", command}, {"status", status}, {"seed", ctx.seed}};
    if (!reason.empty()) result["failure_reason"] = reason;
    for (auto& [k, v] : ctx.result.items()) result[k] = v;
    if (!commands().count(command)) result["command"] = "unknown";

    manifest["command"] = command;
    manifest["seed"] = ctx.seed;
    manifest["status"] = status;
    manifest["exit_code"] = code;
    if (!reason.empty()) manifest["failure_reason"] = reason;
    manifest["wall_time_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::error_code ec;
    if (fs::is_directory(ctx.out, ec) || fs::create_directories(ctx.out, ec)) {
        try {
            write_json(ctx.out / "result.json", result);
            write_json(ctx.out / "manifest.json", manifest);
        } catch (const ConfigError&) {
            if (code == kExitOk) code = kExitValidation;
        }
    } else if (code == kExitOk) {
        code = kExitValidation;
    }
    return code;
}

} // namespace fdist
