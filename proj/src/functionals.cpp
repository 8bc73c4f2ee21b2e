#include "fdist/functionals.hpp"

#include <cmath>
#include <random>

#include <fmt/format.h>

#include "fdist/hopf.hpp"

namespace fdist {

namespace {

// Family value and derivatives with respect to x^2 and y, before the
// jacobian factor and outer power.
PhiJet family_jet(const FunctionalSpec& spec, double xsq, double y)
{
    PhiJet j;
    if (spec.family == Family::Dirichlet) {
        j.value = xsq;
        j.d_xsq = 1.0;
        return j;
    }
    if (!(y > 0.0)) {
        j.value = kInfinity;
        return j;
    }
    const double c = spec.k_scale / y;
    const double k = c * xsq;
    const double p = spec.p;
    switch (spec.family) {
    case Family::LpMean: {
        const double v = std::pow(k, p);
        j.value = v;
        j.d_xsq = k > 0.0 ? p * v / k * c : (p == 1.0 ? c : 0.0);
        j.d_y = -p * v / y;
        break;
    }
    case Family::ExpP: {
        const double e = std::exp(p * k);
        j.value = e;
        j.d_xsq = p * e * c;
        j.d_y = -p * k * e / y;
        break;
    }
    case Family::TruncExp: {
        const double lower = spec.N >= 1 ? truncated_exp(p * k, spec.N - 1) : 0.0;
        j.value = truncated_exp(p * k, spec.N);
        j.d_xsq = p * lower * c;
        j.d_y = -p * k * lower / y;
        break;
    }
    default:
        throw InternalError("family_jet: unsupported family");
    }
    return j;
}

PhiJet apply_jacobian_and_outer(const FunctionalSpec& spec, PhiJet j, double y)
{
    if (spec.jac_exp != 0.0) {
        if (!(y > 0.0)) return {kInfinity, 0.0, 0.0};
        const double w = std::pow(y, spec.jac_exp);
        const double v = j.value;
        j.value = v * w;
        j.d_xsq *= w;
        j.d_y = j.d_y * w + v * spec.jac_exp * w / y;
    }
    if (spec.outer_exp != 1.0 && std::isfinite(j.value)) {
        const double v = j.value;
        const double u = std::pow(v, spec.outer_exp);
        const double scale = v > 0.0 ? spec.outer_exp * u / v : 0.0;
        j.value = u;
        j.d_xsq *= scale;
        j.d_y *= scale;
    }
    return j;
}

double uniform(std::mt19937_64& rng, double lo, double hi)
{
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

} // namespace

void FunctionalSpec::validate() const
{
    if (family != Family::Dirichlet && family != Family::Custom && !(p > 0.0))
        throw ConfigError(fmt::format("functional exponent p must be > 0 (got {})", p));
    if (N < 0) throw ConfigError("truncation order N must be >= 0");
    if (!(s > 0.0 && s < 1.0)) throw ConfigError(fmt::format("s must lie in (0, 1) (got {})", s));
    if (!(jac_exp >= 0.0)) throw ConfigError("jac_exp must be >= 0");
    if (!(k_scale > 0.0)) throw ConfigError("k_scale must be > 0");
    if (!(outer_exp > 0.0)) throw ConfigError("outer exponent must be > 0");
    if (weight == WeightKind::Tabulated && !eta) throw ConfigError("tabulated weight without values");
    if (family == Family::Custom && !custom) throw ConfigError("custom family without a function");
}

bool FunctionalSpec::needs_positive_jacobian() const
{
    return family != Family::Dirichlet || jac_exp != 0.0;
}

FunctionalSpec make_spec(Family family, double p, int N)
{
    FunctionalSpec spec;
    spec.family = family;
    spec.p = p;
    spec.N = N;
    return spec;
}

double truncated_exp(double t, int N)
{
    double term = 1.0, sum = 1.0;
    for (int n = 1; n <= N; ++n) {
        term *= t / n;
        sum += term;
    }
    return sum;
}

PhiJet phi_jet(const FunctionalSpec& spec, double xsq, double y)
{
    if (spec.family == Family::Custom) {
        const double x = std::sqrt(xsq);
        return apply_jacobian_and_outer(spec, {spec.custom(x, y), 0.0, 0.0}, y);
    }
    return apply_jacobian_and_outer(spec, family_jet(spec, xsq, y), y);
}

double phi_eval(const FunctionalSpec& spec, double x, double y) { return phi_jet(spec, x * x, y).value; }

std::vector<double> integrand_values(const FunctionalSpec& spec, const DerivedField& d)
{
    std::vector<double> out(d.size());
    parallel_for(out.size(), [&](std::size_t t) {
        const double x = spec.norm == NormChoice::HilbertSchmidt ? d.hs_norm(t) : d.op_norm(t);
        out[t] = phi_eval(spec, x, d.jacobian[t]);
    });
    return out;
}

std::vector<double> weight_values(const FunctionalSpec& spec, const DerivedField& d)
{
    std::vector<double> eta(d.size(), 1.0);
    switch (spec.weight) {
    case WeightKind::None:
        break;
    case WeightKind::Tabulated:
        if (!spec.eta || spec.eta->size() != d.size())
            throw ConfigError("tabulated weight length does not match the triangle count");
        eta = *spec.eta;
        break;
    case WeightKind::Hyperbolic:
        for (std::size_t t = 0; t < d.size(); ++t) {
            const Complex at =
                spec.weight_at == WeightPlacement::Domain ? d.mesh->centroid(t) : d.image_centroid[t];
            eta[t] = hyperbolic_weight(at);
        }
        break;
    }
    return eta;
}

double energy(const FunctionalSpec& spec, const DerivedField& d)
{
    const auto phi = integrand_values(spec, d);
    const auto eta = weight_values(spec, d);
    const auto& area = d.areas();
    std::vector<double> terms(d.size());
    for (std::size_t t = 0; t < d.size(); ++t) {
        if (!std::isfinite(phi[t])) return kInfinity;
        terms[t] = phi[t] * eta[t] * area[t];
    }
    return pairwise_sum(terms);
}

double inverse_energy(const FunctionalSpec& spec, const DerivedField& d)
{
    const auto& area = d.areas();
    std::vector<double> terms(d.size());
    for (std::size_t t = 0; t < d.size(); ++t) {
        const double jac = d.jacobian[t];
        if (!(jac > 0.0))
            throw DomainError(fmt::format("inverse_energy: triangle {} has J = {} <= 0, inverse undefined", t, jac));
        // Inverse arguments: J_h = 1/J_f, |Dh|^2 = K * J_h with K shared by f and h.
        const double jac_h = 1.0 / jac;
        const double k = spec.norm == NormChoice::HilbertSchmidt ? d.hs_distortion[t] : d.op_distortion[t];
        const double phi = phi_jet(spec, k * jac_h, jac_h).value;
        if (!std::isfinite(phi)) return kInfinity;
        double eta = 1.0;
        if (spec.weight == WeightKind::Hyperbolic) {
            // h(f(z)) = z: the roles of domain and image swap.
            eta = hyperbolic_weight(spec.weight_at == WeightPlacement::Image ? d.mesh->centroid(t)
                                                                             : d.image_centroid[t]);
        } else if (spec.weight == WeightKind::Tabulated) {
            eta = spec.eta->at(t);
        }
        // Integrand Phi(h) J(w, h) over dw = J(z, f) dz.
        terms[t] = phi * eta * jac_h * jac * area[t];
    }
    return pairwise_sum(terms);
}

PolyconvexBound polyconvex_lower_bound(double x, double y, double x0, double y0)
{
    PolyconvexBound b;
    b.lhs = x * x / y - x0 * x0 / y0;
    b.rhs = (2.0 * x0 / y0) * (x - x0) - (x0 * x0 / (y0 * y0)) * (y - y0);
    b.holds = b.lhs >= b.rhs - 1e-12;
    return b;
}

ProbeReport polyconvex_sweep(std::size_t n_samples, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    ProbeReport rep;
    for (std::size_t i = 0; i < n_samples; ++i) {
        const double x = uniform(rng, 0.0, 10.0), x0 = uniform(rng, 0.0, 10.0);
        // (0.1, 10]: reflect the half-open generator interval.
        const double y = 10.1 - uniform(rng, 0.1, 10.0);
        const double y0 = 10.1 - uniform(rng, 0.1, 10.0);
        const auto b = polyconvex_lower_bound(x, y, x0, y0);
        ++rep.samples;
        if (!b.holds) {
            ++rep.violations;
            rep.worst = std::max(rep.worst, b.rhs - b.lhs);
        }
    }
    return rep;
}

ConvexityProbeReport convexity_probe(const FunctionalSpec& spec, const ConvexityProbeOptions& opt)
{
    if (!(opt.box.x_lo >= 0.0 && opt.box.y_lo > 0.0 && opt.box.x_hi > opt.box.x_lo && opt.box.y_hi > opt.box.y_lo))
        throw ConfigError("convexity probe box must lie in x >= 0, y > 0");
    if (!(opt.s > 0.0 && opt.s < 1.0)) throw ConfigError("convexity probe needs s in (0, 1)");
    std::mt19937_64 rng(opt.seed);
    ConvexityProbeReport rep;

    auto draw = [&](double& x, double& y) {
        for (int attempt = 0; attempt < 1000; ++attempt) {
            x = uniform(rng, opt.box.x_lo, opt.box.x_hi);
            y = uniform(rng, opt.box.y_lo, opt.box.y_hi);
            if (x * x / y >= opt.min_distortion) return;
            ++rep.rejected;
        }
        throw ConfigError("convexity probe: min_distortion excludes the whole box");
    };
    auto check = [](ProbeReport& r, double f1, double f2, double fm) {
        ++r.samples;
        const double scale = std::max({std::abs(f1), std::abs(f2), std::abs(fm)});
        const double excess = fm - 0.5 * (f1 + f2);
        if (excess > 1e-10 * scale) {
            ++r.violations;
            r.worst = std::max(r.worst, excess);
        }
    };

    for (std::size_t i = 0; i < opt.n_samples; ++i) {
        double x1, y1, x2, y2;
        draw(x1, y1);
        draw(x2, y2);
        const double xm = 0.5 * (x1 + x2), ym = 0.5 * (y1 + y2);
        const double f1 = phi_eval(spec, x1, y1), f2 = phi_eval(spec, x2, y2), fm = phi_eval(spec, xm, ym);
        check(rep.phi, f1, f2, fm);
        check(rep.phi_weighted, f1 * std::pow(y1, opt.s), f2 * std::pow(y2, opt.s), fm * std::pow(ym, opt.s));
    }
    return rep;
}

ProbeReport monotone_truncation_check(double p, int N_max, std::size_t n_samples, std::uint64_t seed, SampleBox box)
{
    if (N_max < 1) throw ConfigError("monotone_truncation_check needs N_max >= 1");
    std::mt19937_64 rng(seed);
    ProbeReport rep;
    for (std::size_t i = 0; i < n_samples; ++i) {
        const double x = uniform(rng, box.x_lo, box.x_hi);
        const double y = uniform(rng, box.y_lo, box.y_hi);
        const auto seq = truncation_sequence(p, x, y, N_max);
        const double limit = seq.back();
        ++rep.samples;
        for (int n = 0; n < N_max; ++n) {
            const double a = seq[n], b = seq[n + 1];
            const double excess = std::max(a - b, b - limit * (1.0 + 1e-12));
            if (excess > 0.0) {
                ++rep.violations;
                rep.worst = std::max(rep.worst, excess);
                break;
            }
        }
    }
    return rep;
}

std::vector<double> truncation_sequence(double p, double x, double y, int N_max)
{
    FunctionalSpec spec = make_spec(Family::TruncExp, p, 0);
    std::vector<double> out;
    out.reserve(N_max + 2);
    for (int n = 0; n <= N_max; ++n) {
        spec.N = n;
        out.push_back(phi_eval(spec, x, y));
    }
    out.push_back(phi_eval(make_spec(Family::ExpP, p), x, y));
    return out;
}

ProbeReport monotonicity_in_x_check(const FunctionalSpec& spec, std::size_t n_samples, std::uint64_t seed,
                                    SampleBox box)
{
    std::mt19937_64 rng(seed);
    ProbeReport rep;
    for (std::size_t i = 0; i < n_samples; ++i) {
        double x1 = uniform(rng, box.x_lo, box.x_hi), x2 = uniform(rng, box.x_lo, box.x_hi);
        const double y = uniform(rng, box.y_lo, box.y_hi);
        if (x1 > x2) std::swap(x1, x2);
        if (!(x2 > x1) || x2 <= 0.0) continue;
        ++rep.samples;
        const double f1 = phi_eval(spec, x1, y), f2 = phi_eval(spec, x2, y);
        if (!(f2 > f1)) {
            ++rep.violations;
            rep.worst = std::max(rep.worst, f1 - f2);
        }
    }
    return rep;
}

ProbeReport concavity_probe(double s, double p_prime, std::size_t n_samples, std::uint64_t seed)
{
    const double b = s * p_prime;
    if (!(b > 0.0 && b < 1.0))
        throw ConfigError(fmt::format("concavity probe needs 0 < s*p' < 1 (got {})", b));
    std::mt19937_64 rng(seed);
    ProbeReport rep;
    for (std::size_t i = 0; i < n_samples; ++i) {
        // Log-uniform over six decades.
        const double jj = std::pow(10.0, uniform(rng, -3.0, 3.0));
        const double jf = std::pow(10.0, uniform(rng, -3.0, 3.0));
        const double lhs = std::pow(jj, b) - std::pow(jf, b);
        const double rhs = b * std::pow(jf, b - 1.0) * (jj - jf);
        ++rep.samples;
        const double scale = std::max({std::pow(jj, b), std::pow(jf, b), std::abs(rhs)});
        if (lhs - rhs > 1e-12 * scale) {
            ++rep.violations;
            rep.worst = std::max(rep.worst, lhs - rhs);
        }
    }
    return rep;
}

double default_s(double p_rr)
{
    if (!(p_rr > 1.0)) throw ConfigError("default_s needs p > 1");
    const double upper = 1.0 - 1.0 / p_rr;
    return std::min(0.01, upper / 2.0);
}

const char* family_name(Family family)
{
    switch (family) {
    case Family::LpMean: return "lp_mean";
    case Family::ExpP: return "exp_p";
    case Family::TruncExp: return "trunc_exp";
    case Family::Dirichlet: return "dirichlet";
    case Family::Custom: return "custom";
    }
    return "unknown";
}

nlohmann::json spec_to_json(const FunctionalSpec& spec)
{
    nlohmann::json doc{
        {"family", family_name(spec.family)},
        {"p", spec.p},
        {"N", spec.N},
        {"norm", spec.norm == NormChoice::HilbertSchmidt ? "hs" : "op"},
        {"jac_exp", spec.jac_exp},
        {"s", spec.s},
        {"k_scale", spec.k_scale},
        {"outer", spec.outer_exp},
    };
    switch (spec.weight) {
    case WeightKind::None: doc["weight"] = "none"; break;
    case WeightKind::Hyperbolic: doc["weight"] = "hyperbolic"; break;
    case WeightKind::Tabulated:
        doc["weight"] = "tabulated";
        doc["eta"] = *spec.eta;
        break;
    }
    doc["weight_at"] = spec.weight_at == WeightPlacement::Domain ? "domain" : "image";
    return doc;
}

FunctionalSpec spec_from_json(const nlohmann::json& doc)
{
    try {
        FunctionalSpec spec;
        const std::string family = doc.at("family").get<std::string>();
        if (family == "lp_mean") spec.family = Family::LpMean;
        else if (family == "exp_p") spec.family = Family::ExpP;
        else if (family == "trunc_exp") spec.family = Family::TruncExp;
        else if (family == "dirichlet") spec.family = Family::Dirichlet;
        else throw ConfigError("unknown functional family '" + family + "'");
        spec.p = doc.value("p", 1.0);
        spec.N = doc.value("N", 0);
        const std::string norm = doc.value("norm", "hs");
        if (norm == "hs") spec.norm = NormChoice::HilbertSchmidt;
        else if (norm == "op") spec.norm = NormChoice::Operator;
        else throw ConfigError("unknown norm '" + norm + "'");
        spec.jac_exp = doc.value("jac_exp", 0.0);
        spec.s = doc.value("s", 0.01);
        spec.k_scale = doc.value("k_scale", 1.0);
        spec.outer_exp = doc.value("outer", 1.0);
        const std::string weight = doc.value("weight", "none");
        if (weight == "none") {
            spec.weight = WeightKind::None;
        } else if (weight == "hyperbolic") {
            spec.weight = WeightKind::Hyperbolic;
        } else if (weight == "tabulated") {
            spec.weight = WeightKind::Tabulated;
            spec.eta = std::make_shared<const std::vector<double>>(doc.at("eta").get<std::vector<double>>());
        } else {
            throw ConfigError("unknown weight '" + weight + "'");
        }
        const std::string at = doc.value("weight_at", "domain");
        if (at == "domain") spec.weight_at = WeightPlacement::Domain;
        else if (at == "image") spec.weight_at = WeightPlacement::Image;
        else throw ConfigError("unknown weight_at '" + at + "'");
        spec.validate();
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed functional spec: ") + e.what());
    }
}

nlohmann::json probe_to_json(const ProbeReport& r)
{
    return {{"samples", r.samples}, {"violations", r.violations}, {"worst", r.worst}};
}

} // namespace fdist
