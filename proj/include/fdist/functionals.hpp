#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "fdist/fields.hpp"

namespace fdist {

enum class Family { LpMean, ExpP, TruncExp, Dirichlet, Custom };
enum class NormChoice { HilbertSchmidt, Operator };
enum class WeightKind { None, Hyperbolic, Tabulated };
/// Where the weight is sampled: the triangle centroid z, or its image f(z).
enum class WeightPlacement { Domain, Image };

/// Integrand Phi(x, y) with x = |Df| (HS or operator norm) and y = J.
///
/// With k = k_scale * x^2 / y the families are
///   LpMean    k^p
///   ExpP      exp(p k)
///   TruncExp  sum_{n<=N} (p k)^n / n!
///   Dirichlet x^2  (ignores y)
/// and the result is multiplied by y^jac_exp and then raised to outer_exp.
/// Any family except Dirichlet returns +inf for y <= 0.
struct FunctionalSpec {
    Family family = Family::LpMean;
    double p = 1.0;
    int N = 0;
    NormChoice norm = NormChoice::HilbertSchmidt;
    double jac_exp = 0.0;
    double k_scale = 1.0;
    double outer_exp = 1.0;
    WeightKind weight = WeightKind::None;
    WeightPlacement weight_at = WeightPlacement::Domain;
    std::shared_ptr<const std::vector<double>> eta;  // per triangle, WeightKind::Tabulated
    double s = 0.01;
    /// Replaces the family formula when family == Custom (probe inputs).
    std::function<double(double, double)> custom;

    void validate() const;
    /// True when the integrand depends on J (everything but plain Dirichlet).
    bool needs_positive_jacobian() const;
};

FunctionalSpec make_spec(Family family, double p = 1.0, int N = 0);

/// Value and partial derivatives with respect to x^2 and y.
struct PhiJet {
    double value = 0.0;
    double d_xsq = 0.0;
    double d_y = 0.0;
};

PhiJet phi_jet(const FunctionalSpec& spec, double xsq, double y);
double phi_eval(const FunctionalSpec& spec, double x, double y);

/// sum_{n=0}^{N} t^n / n!
double truncated_exp(double t, int N);

/// Per-triangle integrand Phi(|Df|, J) (no weight, no area).
std::vector<double> integrand_values(const FunctionalSpec& spec, const DerivedField& derived);
/// Per-triangle weight eta (ones when the spec is unweighted).
std::vector<double> weight_values(const FunctionalSpec& spec, const DerivedField& derived);

/// sum_t Phi(|Df|, J) eta area_t; +inf as soon as one term is infinite.
double energy(const FunctionalSpec& spec, const DerivedField& derived);

/// Integral of Phi(|Dh|, J_h) J_h over f(Omega) for h = f^{-1}, evaluated on the forward
/// mesh through K(f(z), h) = K(z, f) and J(f(z), h) = 1/J(z, f).
/// Throws DomainError if some triangle has J <= 0.
double inverse_energy(const FunctionalSpec& spec, const DerivedField& derived);

struct PolyconvexBound {
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = false;
};

/// Tangent-plane inequality for x^2/y at (x0, y0).
PolyconvexBound polyconvex_lower_bound(double x, double y, double x0, double y0);

struct SampleBox {
    double x_lo = 0.0, x_hi = 5.0;
    double y_lo = 0.1, y_hi = 5.0;
};

struct ProbeReport {
    std::size_t samples = 0;
    std::size_t violations = 0;
    double worst = 0.0;  // largest violation amount (0 if none)
};

/// Randomized sweep of polyconvex_lower_bound over x, x0 in [0, 10], y, y0 in (0.1, 10].
ProbeReport polyconvex_sweep(std::size_t n_samples, std::uint64_t seed);

struct ConvexityProbeReport {
    ProbeReport phi;           // midpoint convexity of Phi
    ProbeReport phi_weighted;  // midpoint convexity of Phi * y^s
    std::size_t rejected = 0;  // pairs redrawn because of min_distortion
};

struct ConvexityProbeOptions {
    double s = 0.01;
    std::size_t n_samples = 100000;
    SampleBox box{};
    /// Restrict endpoints to k = x^2/y >= min_distortion. Maps only reach
    /// k >= 2 (HS) or k >= 1 (operator norm), so this is the admissible cone.
    double min_distortion = 0.0;
    std::uint64_t seed = 1;
};

ConvexityProbeReport convexity_probe(const FunctionalSpec& spec, const ConvexityProbeOptions& options);

/// TruncExp(p, N) <= TruncExp(p, N+1) <= ExpP(p) at random (x, y) for N < N_max.
ProbeReport monotone_truncation_check(double p, int N_max, std::size_t n_samples, std::uint64_t seed,
                                      SampleBox box = {});

/// [TruncExp(p, 0..N_max)(x, y)] followed by ExpP(p)(x, y).
std::vector<double> truncation_sequence(double p, double x, double y, int N_max);

/// Strict increase of Phi in x at fixed y > 0 over random samples.
ProbeReport monotonicity_in_x_check(const FunctionalSpec& spec, std::size_t n_samples, std::uint64_t seed,
                                    SampleBox box = {});

/// Tangent bound a^b - c^b <= b c^(b-1) (a - c) for b = s*p_prime in (0, 1).
/// Throws ConfigError when s*p_prime is not in (0, 1).
ProbeReport concavity_probe(double s, double p_prime, std::size_t n_samples, std::uint64_t seed);

/// min(0.01, (1 - 1/p)/2), the condition-4 exponent used when none is given.
double default_s(double p_rr);

nlohmann::json spec_to_json(const FunctionalSpec& spec);
FunctionalSpec spec_from_json(const nlohmann::json& doc);
const char* family_name(Family family);

nlohmann::json probe_to_json(const ProbeReport& report);

} // namespace fdist
