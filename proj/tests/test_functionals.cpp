#include "doctest.h"

#include "fdist/functionals.hpp"
#include "support.hpp"

using namespace fdist;
using fdist::test::disk;

namespace {

const double kE2 = std::exp(2.0);

} // namespace

TEST_CASE("phi_eval closed forms")
{
    const double r2 = std::sqrt(2.0);
    CHECK(phi_eval(make_spec(Family::TruncExp, 1.0, 0), 3.0, 0.7) == 1.0);
    CHECK(phi_eval(make_spec(Family::TruncExp, 1.0, 2), r2, 1.0) == doctest::Approx(5.0));
    CHECK(phi_eval(make_spec(Family::ExpP, 1.0), r2, 1.0) == doctest::Approx(7.389056098930650));
    CHECK(phi_eval(make_spec(Family::TruncExp, 1.0, 25), r2, 1.0) == doctest::Approx(kE2).epsilon(1e-14));
    CHECK(phi_eval(make_spec(Family::LpMean, 2.0), r2, 1.0) == doctest::Approx(4.0));
    CHECK(phi_eval(make_spec(Family::Dirichlet), 3.0, -1.0) == doctest::Approx(9.0));
    CHECK(std::isinf(phi_eval(make_spec(Family::ExpP, 1.0), 1.0, 0.0)));
    CHECK(std::isinf(phi_eval(make_spec(Family::LpMean, 1.0), 1.0, -2.0)));

    FunctionalSpec weighted = make_spec(Family::TruncExp, 1.0, 0);
    weighted.jac_exp = 0.5;
    CHECK(phi_eval(weighted, 2.0, 4.0) == doctest::Approx(2.0));
}

TEST_CASE("truncated_exp partial sums")
{
    const std::vector<double> expect = {1.0, 3.0, 5.0, 19.0 / 3.0};
    for (int N = 0; N < 4; ++N) CHECK(truncated_exp(2.0, N) == doctest::Approx(expect[N]));
    const auto seq = truncation_sequence(1.0, std::sqrt(2.0), 1.0, 3);
    REQUIRE(seq.size() == 5);
    for (int N = 0; N < 4; ++N) CHECK(seq[N] == doctest::Approx(expect[N]));
    CHECK(seq[4] == doctest::Approx(kE2));
    for (std::size_t i = 1; i < seq.size(); ++i) CHECK(seq[i] > seq[i - 1]);
}

TEST_CASE("identity energies")
{
    const auto mesh = disk(5);
    const DerivedField id = wirtinger_derivatives(sample_analytic(mesh, make_affine({1.0, 0.0}, {})));
    const double area = mesh->total_area();
    CHECK(energy(make_spec(Family::LpMean, 2.0), id) == doctest::Approx(4.0 * area));
    CHECK(std::abs(energy(make_spec(Family::LpMean, 2.0), id) - 4.0 * kPi) < 1e-3 * 4.0 * kPi);
    CHECK(std::abs(energy(make_spec(Family::ExpP, 1.0), id) - kPi * kE2) < 1e-3 * kPi * kE2);
    CHECK(energy(make_spec(Family::Dirichlet), id) == doctest::Approx(2.0 * area));
}

TEST_CASE("orientation reversing maps have infinite J-dependent energies")
{
    const auto mesh = disk(2);
    const DerivedField d = wirtinger_derivatives(sample_analytic(mesh, make_affine({}, {1.0, 0.0})));
    for (Family f : {Family::LpMean, Family::ExpP, Family::TruncExp}) CHECK(std::isinf(energy(make_spec(f, 1.0, 2), d)));
    CHECK(std::isfinite(energy(make_spec(Family::Dirichlet), d)));
    CHECK_THROWS_AS(inverse_energy(make_spec(Family::ExpP, 1.0), d), DomainError);
}

TEST_CASE("weights")
{
    const auto mesh = disk(3);
    const DerivedField id = wirtinger_derivatives(sample_analytic(mesh, make_affine({1.0, 0.0}, {})));
    FunctionalSpec spec = make_spec(Family::LpMean, 1.0);
    spec.weight = WeightKind::Tabulated;
    spec.eta = std::make_shared<const std::vector<double>>(id.size(), 3.0);
    CHECK(energy(spec, id) == doctest::Approx(3.0 * 2.0 * mesh->total_area()));

    spec.weight = WeightKind::Hyperbolic;
    const auto w = weight_values(spec, id);
    for (std::size_t t = 0; t < w.size(); ++t) {
        const double r2 = std::norm(mesh->centroid(t));
        CHECK(w[t] == doctest::Approx(1.0 / ((1.0 - r2) * (1.0 - r2))));
    }
}

TEST_CASE("polyconvex lower bound examples")
{
    auto b = polyconvex_lower_bound(1.0, 1.0, 1.0, 1.0);
    CHECK(b.lhs == doctest::Approx(0.0));
    CHECK(b.rhs == doctest::Approx(0.0));
    CHECK(b.holds);
    b = polyconvex_lower_bound(2.0, 1.0, 1.0, 1.0);
    CHECK(b.lhs == doctest::Approx(3.0));
    CHECK(b.rhs == doctest::Approx(2.0));
    CHECK(b.holds);
}

TEST_CASE("polyconvex sweep: 10^6 samples hold")
{
    const auto r = polyconvex_sweep(1000000, 42);
    CHECK(r.samples == 1000000);
    CHECK(r.violations == 0);
}

TEST_CASE("convexity probe examples")
{
    ConvexityProbeOptions o;
    o.n_samples = 100000;
    o.box = {0.0, 5.0, 0.1, 5.0};

    o.s = 0.1;
    auto r = convexity_probe(make_spec(Family::LpMean, 2.0), o);
    CHECK(r.phi.violations == 0);
    CHECK(r.phi_weighted.violations == 0);

    o.s = 0.01;
    o.min_distortion = 2.0;
    r = convexity_probe(make_spec(Family::ExpP, 1.0), o);
    CHECK(r.phi.violations == 0);
    CHECK(r.phi_weighted.violations == 0);

    FunctionalSpec planted = make_spec(Family::Custom);
    planted.custom = [](double x, double) { return -x * x; };
    r = convexity_probe(planted, o);
    CHECK(r.phi.violations > 0);
    CHECK(r.phi.worst > 0.0);
}

TEST_CASE("convexity probe needs the admissible cone for y^s")
{
    // exp(k) y^s fails midpoint convexity near k = 0 since y^s is concave.
    ConvexityProbeOptions o;
    o.n_samples = 100000;
    o.s = 0.01;
    const auto open = convexity_probe(make_spec(Family::ExpP, 1.0), o);
    CHECK(open.phi_weighted.violations > 0);
    const auto n0 = convexity_probe(make_spec(Family::TruncExp, 1.0, 0), o);
    CHECK(n0.phi_weighted.violations > 0);
}

TEST_CASE("monotone truncation check")
{
    for (double p : {0.5, 1.0, 2.0}) {
        const auto r = monotone_truncation_check(p, 20, 10000, 3);
        CHECK(r.samples > 0);
        CHECK(r.violations == 0);
    }
}

TEST_CASE("concavity probe examples")
{
    const auto r = concavity_probe(0.25, 2.0, 100000, 8);
    CHECK(r.violations == 0);
    CHECK_THROWS_AS(concavity_probe(0.5, 2.0, 10, 1), ConfigError);
    CHECK_THROWS_AS(concavity_probe(0.75, 2.0, 10, 1), ConfigError);
    // Tangent-bound arithmetic: a = 4, c = 1, b = 1/2 gives 2 - 1 <= 0.5 * 3.
    CHECK(std::pow(4.0, 0.5) - 1.0 <= 0.5 * 3.0);
}

TEST_CASE("default s")
{
    CHECK(default_s(2.0) == doctest::Approx(0.01));
    CHECK(default_s(1.01) == doctest::Approx((1.0 - 1.0 / 1.01) / 2.0));
}

TEST_CASE("property: phi is strictly increasing in x for every family")
{
    for (Family f : {Family::LpMean, Family::ExpP, Family::TruncExp, Family::Dirichlet}) {
        const auto r = monotonicity_in_x_check(make_spec(f, 1.0, 4), 20000, 17);
        CHECK(r.violations == 0);
    }
}

TEST_CASE("property: truncations increase to exp pointwise")
{
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> ux(0.0, 4.0), uy(0.2, 4.0);
    for (int i = 0; i < 1000; ++i) {
        const double x = ux(rng), y = uy(rng);
        const auto seq = truncation_sequence(1.0, x, y, 30);
        for (std::size_t k = 1; k < seq.size(); ++k) CHECK(seq[k] >= seq[k - 1] * (1.0 - 1e-15));
        if (x * x / y < 8.0) CHECK(seq[30] == doctest::Approx(seq.back()).epsilon(1e-9));
    }
}

TEST_CASE("property: Dirichlet energy is the HS seminorm")
{
    std::mt19937_64 rng(21);
    const auto mesh = disk(3);
    const DerivedField d = wirtinger_derivatives(test::random_feasible(mesh, rng, 0.3));
    double expect = 0.0;
    for (std::size_t t = 0; t < d.size(); ++t)
        expect += 2.0 * (std::norm(d.fz[t]) + std::norm(d.fzbar[t])) * mesh->areas[t];
    CHECK(energy(make_spec(Family::Dirichlet), d) == doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("property: change of variables for affine maps")
{
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    const auto mesh = disk(3);
    for (int trial = 0; trial < 10; ++trial) {
        const DerivedField d = wirtinger_derivatives(test::affine(mesh, {1.0 + u(rng), u(rng)}, {u(rng), u(rng)}));
        const auto spec = make_spec(Family::ExpP, 1.0);
        const double forward = energy(spec, d);
        CHECK(std::abs(inverse_energy(spec, d) - forward) <= 1e-10 * forward);
    }
}

TEST_CASE("spec json round trip and errors")
{
    FunctionalSpec spec = make_spec(Family::TruncExp, 1.5, 7);
    spec.norm = NormChoice::Operator;
    spec.jac_exp = 1.0;
    spec.outer_exp = 0.5;
    spec.weight = WeightKind::Hyperbolic;
    const FunctionalSpec back = spec_from_json(spec_to_json(spec));
    CHECK(back.family == spec.family);
    CHECK(back.p == spec.p);
    CHECK(back.N == spec.N);
    CHECK(back.norm == spec.norm);
    CHECK(back.jac_exp == spec.jac_exp);
    CHECK(back.outer_exp == spec.outer_exp);
    CHECK(back.weight == spec.weight);
    CHECK_THROWS_AS(spec_from_json({{"family", "quartic"}}), ConfigError);
    CHECK_THROWS_AS(spec_from_json({{"family", "lp_mean"}, {"p", -1.0}}), ConfigError);
    CHECK_THROWS_AS(spec_from_json({{"family", "trunc_exp"}, {"N", -2}}), ConfigError);
}
