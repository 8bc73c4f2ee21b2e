#include "doctest.h"

#include "fdist/sequences.hpp"
#include "support.hpp"

using namespace fdist;
using fdist::test::disk;

TEST_CASE("constant recipe members are identical")
{
    SequenceRecipe r;
    r.j_max = 5;
    const auto seq = generate(r, disk(2));
    REQUIRE(seq.size() == 5);
    for (const auto& m : seq.members) CHECK(m.values() == seq.limit.values());
    CHECK(seq.indices == std::vector<int>{1, 2, 3, 4, 5});
}

TEST_CASE("radial stretch facts")
{
    const auto one = radial_stretch_facts(1.0);
    CHECK(one.hs_distortion == doctest::Approx(2.0));
    CHECK(one.beltrami_modulus == doctest::Approx(0.0));
    const auto two = radial_stretch_facts(2.0);
    CHECK(two.hs_distortion == doctest::Approx(2.5));
    CHECK(two.beltrami_modulus == doctest::Approx(1.0 / 3.0));
    CHECK(two.jacobian({0.3, 0.4}) == doctest::Approx(2.0 * 0.25));
    const auto three = radial_stretch_facts(3.0);
    CHECK(three.hs_distortion == doctest::Approx(10.0 / 3.0));
    CHECK(three.beltrami_modulus == doctest::Approx(0.5));
    CHECK_THROWS_AS(radial_stretch_facts(0.0), ConfigError);
}

TEST_CASE("radial stretch derivatives match finite differences")
{
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(-0.7, 0.7);
    const double h = 1e-6;
    for (double alpha : {2.0, 3.0, 0.5}) {
        const auto f = radial_stretch_facts(alpha);
        for (int i = 0; i < 10; ++i) {
            Complex z(u(rng), u(rng));
            if (std::abs(z) < 0.1) z += 0.2;
            const Complex dx = (f.map(z + h) - f.map(z - h)) / (2.0 * h);
            const Complex dy = (f.map(z + Complex(0.0, h)) - f.map(z - Complex(0.0, h))) / (2.0 * h);
            const Complex fz = 0.5 * (dx - Complex(0.0, 1.0) * dy);
            const Complex fzbar = 0.5 * (dx + Complex(0.0, 1.0) * dy);
            CHECK(std::abs(fz - f.fz(z)) < 1e-6);
            CHECK(std::abs(fzbar - f.fzbar(z)) < 1e-6);
            CHECK(std::abs(f.map(z) - evaluate(make_radial_stretch(alpha), z)) < 1e-14);
        }
    }
}

TEST_CASE("property: sampled radial stretch distortion converges under refinement")
{
    double prev = 0.0;
    for (int level = 3; level <= 6; ++level) {
        const auto mesh = disk(level);
        const DerivedField d = wirtinger_derivatives(sample_analytic(mesh, make_radial_stretch(2.0)));
        const double h = mesh->max_edge_length();
        std::vector<double> err;
        for (std::size_t t = 0; t < d.size(); ++t)
            if (std::abs(mesh->centroid(t)) >= h) err.push_back(std::abs(d.hs_distortion[t] - 2.5));
        std::nth_element(err.begin(), err.begin() + err.size() / 2, err.end());
        const double median = err[err.size() / 2];
        if (level > 3) CHECK(median < prev);
        if (level == 5) CHECK(median / 2.5 < 0.02);
        prev = median;
    }
}

TEST_CASE("recipe/domain mismatch is a configuration error")
{
    SequenceRecipe osc;
    osc.kind = RecipeKind::Oscillation;
    CHECK_THROWS_AS(generate(osc, disk(2)), ConfigError);
    SequenceRecipe rad;
    rad.kind = RecipeKind::RadialStretchFamily;
    CHECK_THROWS_AS(generate(rad, test::square(4)), ConfigError);
}

TEST_CASE("oscillation members and metadata")
{
    SequenceRecipe r;
    r.kind = RecipeKind::Oscillation;
    r.j_values = {1, 4};
    r.j_max = 4;
    const auto seq = generate(r, test::square(8));
    CHECK(seq.indices == std::vector<int>{1, 4});
    const auto m = member_map(r, 4);
    const Complex z(0.3, 0.6);
    CHECK(std::abs(evaluate(m, z) - (z + std::sin(2.0 * kPi * 4 * 0.3) / (2.0 * kPi * 4))) < 1e-14);
    CHECK(seq.metadata.contains("facts"));
}

TEST_CASE("affine drift and radial family members approach their limits")
{
    SequenceRecipe drift;
    drift.kind = RecipeKind::AffineDrift;
    drift.j_values = {1, 10, 100};
    drift.j_max = 100;
    const auto seq = generate(drift, disk(2));
    const auto g = lr_gap(seq, Quantity::Df, 2.0);
    for (std::size_t i = 1; i < g.values.size(); ++i) CHECK(g.values[i] < g.values[i - 1]);

    SequenceRecipe rad;
    rad.kind = RecipeKind::RadialStretchFamily;
    rad.j_values = {1, 4, 16};
    rad.j_max = 16;
    const auto rs = generate(rad, disk(3));
    const auto gk = lr_gap(rs, Quantity::Distortion, 1.0);
    for (std::size_t i = 1; i < gk.values.size(); ++i) CHECK(gk.values[i] < gk.values[i - 1]);
}

TEST_CASE("property: lsc holds on generated sequences with finite energies")
{
    struct Case {
        SequenceRecipe recipe;
        MeshPtr mesh;
    };
    std::vector<Case> cases;
    {
        SequenceRecipe r;
        r.map = make_affine({1.0, 0.0}, {0.2, 0.1});
        cases.push_back({r, disk(3)});
    }
    {
        SequenceRecipe r;
        r.kind = RecipeKind::Mollified;
        r.map = {CubicMap{0.0, 0.2}};
        r.j_values = {2, 4, 8, 16};
        r.j_max = 16;
        cases.push_back({r, disk(4)});
    }
    {
        SequenceRecipe r;
        r.kind = RecipeKind::Oscillation;
        r.j_values = {1, 2, 4, 8};
        r.j_max = 8;
        cases.push_back({r, std::make_shared<const Mesh>(build_square_mesh(1, 16))});
    }
    {
        SequenceRecipe r;
        r.kind = RecipeKind::AffineDrift;
        r.j_values = {1, 2, 4, 8, 16};
        r.j_max = 16;
        cases.push_back({r, disk(3)});
    }
    FunctionalSpec truncated = make_spec(Family::TruncExp, 1.0, 4);
    for (const auto& c : cases) {
        const auto seq = generate(c.recipe, c.mesh);
        for (const auto& spec : {make_spec(Family::LpMean, 1.0), make_spec(Family::LpMean, 2.0),
                                 make_spec(Family::ExpP, 1.0), truncated, make_spec(Family::Dirichlet)}) {
            const auto lsc = lsc_check(spec, seq);
            if (!std::isfinite(lsc.limit_energy)) continue;
            INFO(recipe_kind_name(c.recipe.kind), " ", family_name(spec.family), " p=", spec.p);
            CHECK(lsc.holds);
        }
    }
}

TEST_CASE("recipe json")
{
    SequenceRecipe r;
    r.kind = RecipeKind::Mollified;
    r.map = {CubicMap{0.0, 0.2}};
    r.radius_scale = 0.5;
    r.j_values = {2, 4};
    r.j_max = 4;
    const auto back = recipe_from_json(recipe_to_json(r));
    CHECK(back.kind == r.kind);
    CHECK(back.radius_scale == 0.5);
    CHECK(back.indices() == std::vector<int>{2, 4});
    CHECK(tag_of(back.map) == "cubic");
    CHECK_THROWS_AS(recipe_from_json({{"kind", "spiral"}}), ConfigError);
    CHECK_THROWS_AS(recipe_from_json({{"kind", "constant"}, {"j_values", {1, 2}}, {"j_max", 5}}), ConfigError);
    CHECK_THROWS_AS(recipe_from_json({{"kind", "constant"}, {"j_max", 0}}), ConfigError);
}
