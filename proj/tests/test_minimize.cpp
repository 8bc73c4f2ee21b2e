#include "doctest.h"

#include <map>
#include <sstream>

#include "fdist/minimize.hpp"
#include "support.hpp"

using namespace fdist;
using fdist::test::disk;

namespace {

double fd_relative_error(const FunctionalSpec& spec, const MappingField& f, double h = 1e-6)
{
    const auto g = energy_gradient(spec, f);
    const Mesh& mesh = f.mesh();
    double num = 0.0, den = 0.0;
    MappingField probe = f;
    auto& values = probe.mutable_values();
    for (std::size_t v = 0; v < mesh.node_count(); ++v) {
        if (mesh.is_boundary[v]) continue;
        const Complex base = values[v];
        Complex fd;
        for (const Complex dir : {Complex(1.0, 0.0), Complex(0.0, 1.0)}) {
            values[v] = base + h * dir;
            const double ep = energy(spec, wirtinger_derivatives(probe));
            values[v] = base - h * dir;
            const double em = energy(spec, wirtinger_derivatives(probe));
            fd += dir * ((ep - em) / (2.0 * h));
        }
        values[v] = base;
        num += std::norm(fd - g[v]);
        den += std::norm(g[v]);
    }
    return std::sqrt(num / den);
}

} // namespace

TEST_CASE("stiffness matrix is symmetric with zero row sums")
{
    const auto mesh = disk(2);
    std::map<std::pair<int, int>, double> a;
    for (const auto& e : stiffness_entries(*mesh)) a[{e.row, e.col}] += e.value;
    std::vector<double> rows(mesh->node_count(), 0.0);
    for (const auto& [key, value] : a) {
        rows[key.first] += value;
        CHECK(a.at({key.second, key.first}) == doctest::Approx(value));
    }
    for (double r : rows) CHECK(std::abs(r) < 1e-12);
}

TEST_CASE("harmonic extension reproduces affine boundary data")
{
    const auto mesh = disk(3);
    const auto f = harmonic_extension(mesh, {});
    for (std::size_t v = 0; v < mesh->node_count(); ++v) CHECK(std::abs(f.values()[v] - mesh->nodes[v]) < 1e-12);

    BoundaryData explicit_data;
    explicit_data.kind = BoundaryKind::Explicit;
    const Complex a(1.2, 0.3), b(0.2, -0.1);
    for (int v : mesh->boundary_nodes) explicit_data.values.push_back(a * mesh->nodes[v] + b * std::conj(mesh->nodes[v]));
    const auto g = harmonic_extension(mesh, explicit_data);
    for (std::size_t v = 0; v < mesh->node_count(); ++v)
        CHECK(std::abs(g.values()[v] - (a * mesh->nodes[v] + b * std::conj(mesh->nodes[v]))) < 1e-12);
}

TEST_CASE("gradient vanishes at the identity for LpMean(2)")
{
    const auto f = harmonic_extension(disk(4), {});
    const auto g = energy_gradient(make_spec(Family::LpMean, 2.0), f);
    double norm = 0.0;
    for (const Complex& c : g) norm = std::max(norm, std::abs(c));
    CHECK(norm < 1e-10);
}

TEST_CASE("Dirichlet gradient of an affine map is zero on a structured mesh")
{
    const auto mesh = test::square(6);
    const auto g = energy_gradient(make_spec(Family::Dirichlet), test::affine(mesh, {1.1, 0.2}, {0.3, 0.1}));
    for (const Complex& c : g) CHECK(std::abs(c) < 1e-12);
}

TEST_CASE("gradient matches central finite differences")
{
    std::mt19937_64 rng(77);
    const auto mesh = disk(2);
    FunctionalSpec weighted = make_spec(Family::TruncExp, 1.0, 6);
    weighted.jac_exp = 1.0;
    weighted.weight = WeightKind::Hyperbolic;
    weighted.weight_at = WeightPlacement::Image;
    FunctionalSpec op = make_spec(Family::LpMean, 1.5);
    op.norm = NormChoice::Operator;
    for (const FunctionalSpec& spec : {make_spec(Family::LpMean, 2.0), make_spec(Family::ExpP, 1.0),
                                       make_spec(Family::TruncExp, 1.0, 8), make_spec(Family::Dirichlet), weighted,
                                       op}) {
        for (int trial = 0; trial < 3; ++trial) {
            const MappingField f = test::random_feasible(mesh, rng, 0.2);
            CHECK(fd_relative_error(spec, f) < 1e-6);
        }
    }
}

TEST_CASE("boundary gradient entries are zero")
{
    std::mt19937_64 rng(8);
    const auto mesh = disk(3);
    const auto g = energy_gradient(make_spec(Family::ExpP, 1.0), test::random_feasible(mesh, rng));
    for (int v : mesh->boundary_nodes) CHECK(g[v] == Complex(0.0, 0.0));
}

TEST_CASE("energy_gradient rejects maps below the floor")
{
    const auto mesh = disk(2);
    MappingField f = harmonic_extension(mesh, {});
    f.mutable_values()[0] = {0.9, 0.0};
    CHECK_THROWS_AS(energy_gradient(make_spec(Family::ExpP, 1.0), f), DomainError);
}

TEST_CASE("minimiser recovers the identity from a perturbed start")
{
    std::mt19937_64 rng(3);
    const auto mesh = disk(3);
    const MappingField start = test::random_feasible(mesh, rng, 0.1);
    MinimizeConfig config;
    config.max_iterations = 400;
    const auto r = minimize_energy(make_spec(Family::LpMean, 2.0), mesh, {}, config, start);
    CHECK(r.energy() == doctest::Approx(4.0 * mesh->total_area()).epsilon(1e-6));
    double dist = 0.0;
    for (std::size_t v = 0; v < mesh->node_count(); ++v) dist = std::max(dist, std::abs(r.mapping.values()[v] - mesh->nodes[v]));
    CHECK(dist < 1e-4);
}

TEST_CASE("property: trace decreases and respects the Jacobian floor")
{
    const auto mesh = disk(3);
    MinimizeConfig config;
    config.max_iterations = 60;
    const auto r = minimize_energy(make_spec(Family::ExpP, 1.0), mesh, circle_diffeo({0.0, 0.3}), config);
    REQUIRE(r.trace.size() > 2);
    for (std::size_t i = 1; i < r.trace.size(); ++i) {
        CHECK(r.trace[i].energy < r.trace[i - 1].energy);
        CHECK(r.trace[i].min_jacobian >= r.jacobian_floor);
    }
}

TEST_CASE("property: runs are bit-reproducible across thread counts")
{
    const auto mesh = disk(4);
    MinimizeConfig config;
    config.max_iterations = 20;
    const auto spec = make_spec(Family::TruncExp, 1.0, 4);
    set_thread_count(1);
    const auto a = minimize_energy(spec, mesh, circle_diffeo({0.0, 0.3}), config);
    set_thread_count(4);
    const auto b = minimize_energy(spec, mesh, circle_diffeo({0.0, 0.3}), config);
    set_thread_count(1);
    CHECK(a.mapping.values() == b.mapping.values());
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) CHECK(a.trace[i].energy == b.trace[i].energy);
}

TEST_CASE("truncation sweep energies increase with N")
{
    const auto mesh = disk(3);
    const auto entries = truncation_sweep(1.0, {1, 2, 4}, mesh, {}, {});
    REQUIRE(entries.size() == 3);
    for (std::size_t i = 1; i < entries.size(); ++i) CHECK(entries[i].result.energy() > entries[i - 1].result.energy());
    CHECK_THROWS_AS(truncation_sweep(1.0, {2, 1}, mesh, {}, {}), ConfigError);
}

TEST_CASE("configuration validation")
{
    MinimizeConfig bad;
    bad.backtracking_factor = 1.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK_THROWS_AS(circle_diffeo({3.0}).validate(), ConfigError);
    CHECK_THROWS_AS(boundary_from_json({{"kind", "spiral"}}), ConfigError);
    CHECK_THROWS_AS(minimize_config_from_json({{"preconditioner", "newton"}}), ConfigError);

    const auto cfg = minimize_config_from_json(minimize_config_to_json(MinimizeConfig{}));
    CHECK(cfg.gradient_tolerance == MinimizeConfig{}.gradient_tolerance);
    const auto bd = boundary_from_json(boundary_to_json(circle_diffeo({0.0, 0.3}, {0.1})));
    CHECK(bd.kind == BoundaryKind::CircleDiffeo);
    CHECK(bd.a == std::vector<double>{0.0, 0.3});
    CHECK(bd.b == std::vector<double>{0.1});
}

TEST_CASE("trace csv columns")
{
    std::ostringstream out;
    write_trace_csv(out, {TraceRow{0, 1.5, 0.1, 0.9, 0.0}});
    CHECK(out.str().rfind("iteration,energy,grad_norm,min_J,step\n", 0) == 0);
}
