#include "fdist/convergence.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>

#include <fmt/format.h>

namespace fdist {

namespace {

bool in_mask(const std::vector<char>& mask, std::size_t t) { return mask.empty() || mask[t]; }

void check_mask(const Mesh& mesh, const std::vector<char>& mask)
{
    if (mask.empty()) return;
    if (mask.size() != mesh.triangle_count()) throw ConfigError("subdomain mask has the wrong length");
    if (std::none_of(mask.begin(), mask.end(), [](char c) { return c != 0; }))
        throw DomainError("empty subdomain");
}

/// |q(a) - q(b)| on triangle t, or |q(a)| when b is null. Sets `excluded`
/// where the quantity is undefined.
double pointwise(const DerivedField& a, const DerivedField* b, Quantity q, std::size_t t, bool& excluded)
{
    excluded = false;
    switch (q) {
    case Quantity::Df: {
        const Complex dz = b ? a.fz[t] - b->fz[t] : a.fz[t];
        const Complex dzb = b ? a.fzbar[t] - b->fzbar[t] : a.fzbar[t];
        return std::sqrt(std::norm(dz) + std::norm(dzb));
    }
    case Quantity::Fz: return std::abs(b ? a.fz[t] - b->fz[t] : a.fz[t]);
    case Quantity::Fzbar: return std::abs(b ? a.fzbar[t] - b->fzbar[t] : a.fzbar[t]);
    case Quantity::Jacobian: return std::abs(b ? a.jacobian[t] - b->jacobian[t] : a.jacobian[t]);
    case Quantity::Beltrami:
        if (!a.beltrami_defined[t] || (b && !b->beltrami_defined[t])) {
            excluded = true;
            return 0.0;
        }
        return std::abs(b ? a.beltrami[t] - b->beltrami[t] : a.beltrami[t]);
    case Quantity::Distortion: {
        const double ka = a.hs_distortion[t];
        const double kb = b ? b->hs_distortion[t] : 0.0;
        if (!std::isfinite(ka) || !std::isfinite(kb)) {
            excluded = true;
            return 0.0;
        }
        return std::abs(ka - kb);
    }
    }
    return 0.0;
}

struct Measured {
    double value = 0.0;
    double excluded_area = 0.0;
    double median = 0.0;
    double p95 = 0.0;
};

double percentile(std::vector<double> v, double q)
{
    if (v.empty()) return 0.0;
    const auto k = static_cast<std::size_t>(std::floor(q * (v.size() - 1) + 0.5));
    std::nth_element(v.begin(), v.begin() + k, v.end());
    return v[k];
}

/// L^r (quasi-)norm of per-triangle values d_t with exclusions.
template <class Values>
Measured measure(const Mesh& mesh, const std::vector<char>& mask, double r, Values&& values, bool percentiles)
{
    const std::size_t n = mesh.triangle_count();
    std::vector<double> powered(n, 0.0), excluded(n, 0.0), raw(percentiles ? n : 0, 0.0);
    std::vector<char> included(n, 0);
    parallel_for(n, [&](std::size_t t) {
        if (!in_mask(mask, t)) return;
        bool ex = false;
        const double d = values(t, ex);
        if (ex) {
            excluded[t] = mesh.areas[t];
            return;
        }
        included[t] = 1;
        powered[t] = std::pow(d, r) * mesh.areas[t];
        if (percentiles) raw[t] = d;
    });
    Measured m;
    m.value = std::pow(pairwise_sum(powered), 1.0 / r);
    m.excluded_area = pairwise_sum(excluded);
    if (percentiles) {
        std::vector<double> kept;
        kept.reserve(n);
        for (std::size_t t = 0; t < n; ++t)
            if (included[t]) kept.push_back(raw[t]);
        m.median = percentile(kept, 0.5);
        m.p95 = percentile(kept, 0.95);
    }
    return m;
}

/// Phi = integrand^(1/p_rr): the energy integrand is read as Phi^p_rr.
FunctionalSpec root_spec(FunctionalSpec spec, double p_rr)
{
    spec.outer_exp /= p_rr;
    return spec;
}

double scale_or_one(double v) { return v > 0.0 && std::isfinite(v) ? v : 1.0; }

nlohmann::json finite_or_null(double v)
{
    if (std::isfinite(v)) return v;
    return v > 0 ? nlohmann::json("inf") : v < 0 ? nlohmann::json("-inf") : nlohmann::json("nan");
}

nlohmann::json series_json(const std::vector<double>& values)
{
    auto out = nlohmann::json::array();
    for (double v : values) out.push_back(finite_or_null(v));
    return out;
}

} // namespace

double sequence_limit_estimate(const std::vector<double>& values, std::string& estimator)
{
    estimator = "last";
    const std::size_t n = values.size();
    if (n == 0) return 0.0;
    const double last = values.back();
    if (n < 3) return last;
    const double d1 = values[n - 2] - values[n - 3];
    const double d2 = last - values[n - 2];
    if (!std::isfinite(d1) || !std::isfinite(d2) || d1 == 0.0) return last;
    const double rho = d2 / d1;
    if (!(rho > 0.0 && rho <= 0.8)) return last;
    estimator = "aitken";
    return last + d2 * rho / (1.0 - rho);
}

void SequenceHandle::validate() const
{
    if (!mesh) throw ConfigError("sequence without mesh");
    if (members.empty()) throw ConfigError("sequence has no members");
    if (indices.size() != members.size()) throw ConfigError("sequence indices and members differ in length");
    auto same_mesh = [this](const MappingField& f) {
        return f.mesh_ptr() == mesh || (f.mesh_ptr() && f.mesh().node_count() == mesh->node_count() &&
                                        f.mesh().triangle_count() == mesh->triangle_count());
    };
    for (const auto& f : members)
        if (!same_mesh(f)) throw ConfigError("sequence members must share one mesh");
    if (!same_mesh(limit)) throw ConfigError("sequence limit lives on a different mesh");
    if (!member_weights.empty() && member_weights.size() != members.size())
        throw ConfigError("one weight field per member is required");
    for (const auto& w : member_weights)
        if (!w || w->size() != mesh->triangle_count()) throw ConfigError("member weight has the wrong length");
    if (!member_weights.empty() && !limit_weight) throw ConfigError("member weights need a limit weight");
    if (limit_weight && limit_weight->size() != mesh->triangle_count())
        throw ConfigError("limit weight has the wrong length");
    if (!truncation_orders.empty() && truncation_orders.size() != members.size())
        throw ConfigError("one truncation order per member is required");
}

FunctionalSpec member_spec(const FunctionalSpec& spec, const SequenceHandle& seq, std::size_t i)
{
    FunctionalSpec out = spec;
    if (!seq.truncation_orders.empty()) {
        out.family = Family::TruncExp;
        out.N = seq.truncation_orders[i];
    }
    if (!seq.member_weights.empty()) {
        out.weight = WeightKind::Tabulated;
        out.eta = seq.member_weights[i];
    }
    return out;
}

FunctionalSpec limit_spec(const FunctionalSpec& spec, const SequenceHandle& seq)
{
    FunctionalSpec out = spec;
    if (!seq.truncation_orders.empty()) out.family = Family::ExpP;
    if (seq.limit_weight) {
        out.weight = WeightKind::Tabulated;
        out.eta = seq.limit_weight;
    }
    return out;
}

const char* quantity_name(Quantity q)
{
    switch (q) {
    case Quantity::Df: return "Df";
    case Quantity::Fz: return "fz";
    case Quantity::Fzbar: return "fzbar";
    case Quantity::Jacobian: return "J";
    case Quantity::Beltrami: return "mu";
    case Quantity::Distortion: return "K";
    }
    return "unknown";
}

Quantity quantity_from_name(const std::string& name)
{
    for (Quantity q : {Quantity::Df, Quantity::Fz, Quantity::Fzbar, Quantity::Jacobian, Quantity::Beltrami,
                       Quantity::Distortion})
        if (name == quantity_name(q)) return q;
    throw ConfigError("unknown quantity '" + name + "'");
}

LrGap lr_gap(const SequenceHandle& seq, Quantity quantity, double r, const std::vector<char>& mask, double q_declared)
{
    seq.validate();
    if (!(r > 0.0)) throw ConfigError("lr_gap: r must be > 0");
    check_mask(*seq.mesh, mask);
    LrGap gap;
    gap.quantity = quantity;
    gap.r = r;
    if (quantity == Quantity::Jacobian && r >= 1.0)
        gap.warnings.push_back(fmt::format("J gap measured at r = {} outside the range r < 1", r));
    if ((quantity == Quantity::Df || quantity == Quantity::Fz || quantity == Quantity::Fzbar) && r >= q_declared)
        gap.warnings.push_back(fmt::format("Df gap measured at r = {} outside the range r < q = {}", r, q_declared));

    const DerivedField limit = wirtinger_derivatives(seq.limit);
    for (std::size_t i = 0; i < seq.size(); ++i) {
        const DerivedField d = wirtinger_derivatives(seq.members[i]);
        const bool last = i + 1 == seq.size();
        const Measured m = measure(
            *seq.mesh, mask, r, [&](std::size_t t, bool& ex) { return pointwise(d, &limit, quantity, t, ex); }, last);
        gap.values.push_back(m.value);
        gap.excluded_area.push_back(m.excluded_area);
        if (last) {
            gap.median_pointwise = m.median;
            gap.p95_pointwise = m.p95;
        }
    }
    return gap;
}

double lr_norm(const DerivedField& derived, Quantity quantity, double r, const std::vector<char>& mask)
{
    if (!(r > 0.0)) throw ConfigError("lr_norm: r must be > 0");
    check_mask(*derived.mesh, mask);
    return measure(
               *derived.mesh, mask, r,
               [&](std::size_t t, bool& ex) { return pointwise(derived, nullptr, quantity, t, ex); }, false)
        .value;
}

WeakProbeResult weak_probe(const SequenceHandle& seq, int degree)
{
    seq.validate();
    if (degree < 0 || degree > 20) throw ConfigError("weak_probe: degree must lie in [0, 20]");
    const Mesh& mesh = *seq.mesh;
    const auto nd = static_cast<std::size_t>(degree + 1);
    WeakProbeResult res;
    res.degree = degree;
    res.field_count = nd * nd;

    const DerivedField limit = wirtinger_derivatives(seq.limit);
    {
        std::vector<double> df(limit.size()), jac(limit.size());
        for (std::size_t t = 0; t < limit.size(); ++t) {
            df[t] = std::sqrt(std::norm(limit.fz[t]) + std::norm(limit.fzbar[t])) * mesh.areas[t];
            jac[t] = std::abs(limit.jacobian[t]) * mesh.areas[t];
        }
        res.scale = std::max(pairwise_sum(df), pairwise_sum(jac));
    }

    // Reference coordinates in [-1, 1]^2 and a cutoff vanishing on the boundary.
    auto chart = [&mesh](Complex z, double& xi, double& eta) {
        if (mesh.domain == DomainKind::Rectangle) {
            const Complex span = mesh.corner_hi - mesh.corner_lo;
            xi = 2.0 * (z.real() - mesh.corner_lo.real()) / span.real() - 1.0;
            eta = 2.0 * (z.imag() - mesh.corner_lo.imag()) / span.imag() - 1.0;
            return (1.0 - xi * xi) * (1.0 - eta * eta);
        }
        xi = z.real();
        eta = z.imag();
        return std::max(0.0, 1.0 - std::norm(z));
    };

    for (const auto& member : seq.members) {
        const DerivedField d = wirtinger_derivatives(member);
        const std::size_t width = 5 * nd * nd;
        const auto sums = blocked_sums(d.size(), width, [&](std::size_t t, double* acc) {
            double xi, eta;
            const double cut = chart(mesh.centroid(t), xi, eta) * mesh.areas[t];
            double px[21], py[21];
            px[0] = py[0] = 1.0;
            if (degree > 0) {
                px[1] = xi;
                py[1] = eta;
            }
            for (int n = 1; n < degree; ++n) {
                px[n + 1] = ((2 * n + 1) * xi * px[n] - n * px[n - 1]) / (n + 1);
                py[n + 1] = ((2 * n + 1) * eta * py[n] - n * py[n - 1]) / (n + 1);
            }
            const Complex dz = d.fz[t] - limit.fz[t];
            const Complex dzb = d.fzbar[t] - limit.fzbar[t];
            const double dj = d.jacobian[t] - limit.jacobian[t];
            std::size_t k = 0;
            for (std::size_t a = 0; a < nd; ++a)
                for (std::size_t b = 0; b < nd; ++b) {
                    const double phi = px[a] * py[b] * cut;
                    acc[k++] += dz.real() * phi;
                    acc[k++] += dz.imag() * phi;
                    acc[k++] += dzb.real() * phi;
                    acc[k++] += dzb.imag() * phi;
                    acc[k++] += dj * phi;
                }
        });
        double worst = 0.0;
        for (std::size_t f = 0; f < nd * nd; ++f) {
            const double* s = sums.data() + 5 * f;
            worst = std::max({worst, std::hypot(s[0], s[1]), std::hypot(s[2], s[3]), std::abs(s[4])});
        }
        res.residuals.push_back(worst);
    }
    return res;
}

LscResult lsc_check(const FunctionalSpec& spec, const SequenceHandle& seq)
{
    seq.validate();
    spec.validate();
    LscResult res;
    const DerivedField limit = wirtinger_derivatives(seq.limit);
    res.limit_energy = energy(limit_spec(spec, seq), limit);
    res.limit_nonpositive_area = finite_distortion_report(limit).nonpositive_area;
    for (std::size_t i = 0; i < seq.size(); ++i)
        res.energies.push_back(energy(member_spec(spec, seq, i), wirtinger_derivatives(seq.members[i])));
    const std::size_t tail = seq.size() / 2;
    res.liminf_energy = *std::min_element(res.energies.begin() + static_cast<std::ptrdiff_t>(tail), res.energies.end());
    res.scale = std::abs(res.limit_energy) > 0.0 && std::isfinite(res.limit_energy) ? std::abs(res.limit_energy) : 1.0;
    res.holds = res.limit_energy <= res.liminf_energy + 1e-8 * res.scale;
    return res;
}

void DiagnoseOptions::validate() const
{
    if (!(p_rr > 1.0)) throw ConfigError("p_RR must be > 1");
    if (s && !(*s > 0.0 && *s < 1.0 - 1.0 / p_rr))
        throw ConfigError(fmt::format("s = {} must lie in (0, 1 - 1/p_RR) = (0, {})", *s, 1.0 - 1.0 / p_rr));
    if (r_list.empty()) throw ConfigError("r_list must not be empty");
    for (const auto& g : r_list)
        if (!(g.r > 0.0) || !std::isfinite(g.r)) throw ConfigError("r_list entries must have r > 0");
    if (!(q_declared >= 1.0)) throw ConfigError("declared q must be >= 1");
    if (dictionary_degree < 0 || dictionary_degree > 20) throw ConfigError("dictionary_degree must lie in [0, 20]");
    if (probe_samples == 0) throw ConfigError("probe_samples must be > 0");
    if (!(hypothesis_tolerance > 0.0) || !(conclusion_tolerance > 0.0)) throw ConfigError("tolerances must be > 0");
}

const char* verdict_name(Verdict v)
{
    switch (v) {
    case Verdict::StrongConvergence: return "StrongConvergence";
    case Verdict::EnergyGap: return "EnergyGap";
    case Verdict::WeakProbeFail: return "WeakProbeFail";
    case Verdict::JacobianDegenerate: return "JacobianDegenerate";
    case Verdict::Inconclusive: return "Inconclusive";
    }
    return "unknown";
}

ConvergenceReport radon_riesz_diagnose(const FunctionalSpec& spec, const SequenceHandle& seq,
                                       const DiagnoseOptions& options)
{
    options.validate();
    spec.validate();
    seq.validate();
    ConvergenceReport rep;
    rep.options = options;
    rep.s = options.s ? *options.s : default_s(options.p_rr);
    rep.indices = seq.indices;
    const Mesh& mesh = *seq.mesh;

    // (a) structural conditions on Phi_j = integrand_j^(1/p_RR).
    {
        std::set<int> orders(seq.truncation_orders.begin(), seq.truncation_orders.end());
        std::vector<FunctionalSpec> probes;
        if (orders.empty()) {
            probes.push_back(root_spec(spec, options.p_rr));
        } else {
            for (int N : orders) {
                FunctionalSpec s = root_spec(spec, options.p_rr);
                s.family = Family::TruncExp;
                s.N = N;
                probes.push_back(s);
            }
        }
        ConvexityProbeOptions po;
        po.s = rep.s;
        po.n_samples = options.probe_samples;
        po.min_distortion = spec.norm == NormChoice::HilbertSchmidt ? 2.0 : 1.0;
        po.seed = options.seed;
        rep.convexity_ok = true;
        for (std::size_t i = 0; i < probes.size(); ++i) {
            probes[i].weight = WeightKind::None;
            const auto r = convexity_probe(probes[i], po);
            if (i == 0 || r.phi.violations + r.phi_weighted.violations >
                              rep.convexity.phi.violations + rep.convexity.phi_weighted.violations)
                rep.convexity = r;
            rep.convexity_ok = rep.convexity_ok && r.phi.violations == 0 && r.phi_weighted.violations == 0;
        }
        if (spec.family == Family::TruncExp || !orders.empty()) {
            const int n_max = orders.empty() ? spec.N : *orders.rbegin();
            rep.monotonicity = monotone_truncation_check(spec.p, std::max(n_max, 1), options.probe_samples, options.seed);
            rep.monotonicity_ok = rep.monotonicity->violations == 0;
        }
        const auto mono = monotonicity_in_x_check(probes.front(), options.probe_samples, options.seed);
        rep.monotonicity_ok = rep.monotonicity_ok && mono.violations == 0;
    }

    // (b) weak limit.
    rep.weak = weak_probe(seq, options.dictionary_degree);
    {
        const double tol = options.hypothesis_tolerance * scale_or_one(rep.weak.scale);
        const double first = rep.weak.residuals.front(), last = rep.weak.residuals.back();
        rep.weak_probe_ok = last < tol && (last <= first);
    }

    // (c) energy convergence of the integrals of Phi_j^p_RR, (d) J > 0 in the limit.
    const DerivedField limit = wirtinger_derivatives(seq.limit);
    const FunctionalSpec lspec = limit_spec(spec, seq);
    rep.limit_energy = energy(lspec, limit);
    rep.energy_scale = scale_or_one(std::abs(rep.limit_energy));
    {
        const auto fd = finite_distortion_report(limit);
        rep.nonpositive_area_fraction = fd.nonpositive_area / mesh.total_area();
        rep.jacobian_positivity = fd.nonpositive_area == 0.0;
    }

    // (e) conclusion measurements, Phi first.
    const FunctionalSpec lroot = root_spec(lspec, options.p_rr);
    FunctionalSpec lroot_plain = lroot;
    lroot_plain.weight = WeightKind::None;
    const auto phi_limit = integrand_values(lroot_plain, limit);

    ConclusionRow phi_row;
    phi_row.quantity = "Phi";
    phi_row.r = options.p_rr;
    std::vector<ConclusionRow> rows(options.r_list.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& g = options.r_list[k];
        rows[k].quantity = quantity_name(g.quantity);
        rows[k].r = g.r;
        if (g.quantity == Quantity::Jacobian && g.r >= 1.0)
            rows[k].warnings.push_back(fmt::format("J gap measured at r = {} outside the range r < 1", g.r));
        if ((g.quantity == Quantity::Df || g.quantity == Quantity::Fz || g.quantity == Quantity::Fzbar) &&
            g.r >= options.q_declared)
            rows[k].warnings.push_back(
                fmt::format("Df gap measured at r = {} outside the range r < q = {}", g.r, options.q_declared));
        rows[k].scale = scale_or_one(lr_norm(limit, g.quantity, g.r));
    }
    phi_row.scale = scale_or_one(
        measure(mesh, {}, options.p_rr,
                [&](std::size_t t, bool& ex) {
                    ex = !std::isfinite(phi_limit[t]);
                    return ex ? 0.0 : std::abs(phi_limit[t]);
                },
                false)
            .value);

    for (std::size_t i = 0; i < seq.size(); ++i) {
        const DerivedField d = wirtinger_derivatives(seq.members[i]);
        const FunctionalSpec mspec = member_spec(spec, seq, i);
        rep.energies.push_back(energy(mspec, d));
        FunctionalSpec mroot = root_spec(mspec, options.p_rr);
        mroot.weight = WeightKind::None;
        const auto phi = integrand_values(mroot, d);
        const bool last = i + 1 == seq.size();
        const Measured pm = measure(
            mesh, {}, options.p_rr,
            [&](std::size_t t, bool& ex) {
                ex = !std::isfinite(phi[t]) || !std::isfinite(phi_limit[t]);
                return ex ? 0.0 : std::abs(phi[t] - phi_limit[t]);
            },
            last);
        phi_row.values.push_back(pm.value);
        if (last) {
            phi_row.excluded_area = pm.excluded_area;
            phi_row.median_pointwise = pm.median;
            phi_row.p95_pointwise = pm.p95;
        }
        for (std::size_t k = 0; k < rows.size(); ++k) {
            const Quantity q = options.r_list[k].quantity;
            const Measured m = measure(
                mesh, {}, rows[k].r, [&](std::size_t t, bool& ex) { return pointwise(d, &limit, q, t, ex); }, last);
            rows[k].values.push_back(m.value);
            if (last) {
                rows[k].excluded_area = m.excluded_area;
                rows[k].median_pointwise = m.median;
                rows[k].p95_pointwise = m.p95;
            }
        }
    }
    rep.last_energy_gap = rep.energies.back() - rep.limit_energy;
    rep.energy_limit_estimate = sequence_limit_estimate(rep.energies, rep.energy_estimator);
    rep.energy_gap = rep.energy_limit_estimate - rep.limit_energy;
    rep.energy_convergence = std::isfinite(rep.energy_gap) &&
                             std::abs(rep.energy_gap) <= options.hypothesis_tolerance * rep.energy_scale;

    rep.conclusions.push_back(std::move(phi_row));
    for (auto& row : rows) rep.conclusions.push_back(std::move(row));
    bool tails_ok = true;
    for (auto& row : rep.conclusions) {
        row.tail = row.values.back();
        row.tolerance = options.conclusion_tolerance * row.scale;
        row.below = std::isfinite(row.tail) && row.tail <= row.tolerance;
        tails_ok = tails_ok && row.below;
        for (const auto& w : row.warnings) rep.warnings.push_back(w);
    }

    if (!rep.weak_probe_ok) rep.verdict = Verdict::WeakProbeFail;
    else if (!rep.energy_convergence) rep.verdict = Verdict::EnergyGap;
    else if (!rep.jacobian_positivity) rep.verdict = Verdict::JacobianDegenerate;
    else if (!rep.convexity_ok || !rep.monotonicity_ok || !tails_ok) rep.verdict = Verdict::Inconclusive;
    else rep.verdict = Verdict::StrongConvergence;
    return rep;
}

GoodSet good_set(const DerivedField& derived, const std::vector<double>& phi, double eps)
{
    if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("good_set: eps must lie in (0, 1)");
    if (phi.size() != derived.size()) throw ConfigError("good_set: phi has the wrong length");
    const Mesh& mesh = *derived.mesh;
    GoodSet g;
    g.mask.assign(derived.size(), 0);
    std::vector<double> in(derived.size(), 0.0), out(derived.size(), 0.0);
    for (std::size_t t = 0; t < derived.size(); ++t) {
        const double j = derived.jacobian[t];
        if (j > eps && j < 1.0 / eps && phi[t] < 1.0 / eps) {
            g.mask[t] = 1;
            ++g.count;
            in[t] = mesh.areas[t];
        } else {
            out[t] = mesh.areas[t];
        }
    }
    g.area = pairwise_sum(in);
    g.complement_area = pairwise_sum(out);
    return g;
}

SobolevNorm sobolev_norm(const MappingField& mapping, double q, const std::vector<char>& mask)
{
    if (!(q >= 1.0)) throw ConfigError("sobolev_norm: q must be >= 1");
    const Mesh& mesh = mapping.mesh();
    check_mask(mesh, mask);
    const DerivedField d = wirtinger_derivatives(mapping);
    std::vector<double> val(d.size(), 0.0), der(d.size(), 0.0);
    for (std::size_t t = 0; t < d.size(); ++t) {
        if (!in_mask(mask, t)) continue;
        double s = 0.0;
        for (int v : mesh.triangles[t]) s += std::pow(std::abs(mapping.values()[v]), q);
        val[t] = s * mesh.areas[t] / 3.0;
        der[t] = std::pow(std::abs(d.fz[t]) + std::abs(d.fzbar[t]), q) * mesh.areas[t];
    }
    SobolevNorm n;
    n.value_part = pairwise_sum(val);
    n.derivative_part = pairwise_sum(der);
    n.norm = std::pow(n.value_part + n.derivative_part, 1.0 / q);
    return n;
}

double orlicz_function(double t) { return t * t / std::log(std::exp(1.0) + t); }

double orlicz_norm(const MappingField& mapping, const std::vector<char>& mask)
{
    const Mesh& mesh = mapping.mesh();
    check_mask(mesh, mask);
    const DerivedField d = wirtinger_derivatives(mapping);
    std::vector<double> g(d.size(), 0.0);
    double gmax = 0.0;
    for (std::size_t t = 0; t < d.size(); ++t) {
        if (!in_mask(mask, t)) continue;
        g[t] = std::abs(d.fz[t]) + std::abs(d.fzbar[t]);
        gmax = std::max(gmax, g[t]);
    }
    if (gmax == 0.0) return 0.0;
    std::vector<double> terms(d.size());
    auto modular = [&](double lambda) {
        for (std::size_t t = 0; t < d.size(); ++t)
            terms[t] = in_mask(mask, t) ? orlicz_function(g[t] / lambda) * mesh.areas[t] : 0.0;
        return pairwise_sum(terms);
    };
    // modular() decreases in lambda; bracket the root, then bisect in log scale.
    double lo = gmax, hi = gmax;
    while (modular(lo) < 1.0) lo *= 0.5;
    while (modular(hi) > 1.0) hi *= 2.0;
    while (hi - lo > 1e-12 * hi) {
        const double mid = std::sqrt(lo * hi);
        if (modular(mid) > 1.0) lo = mid;
        else hi = mid;
        if (mid == lo && mid == hi) break;
    }
    return 0.5 * (lo + hi);
}

AreaIdentity jacobian_area_identity(const DerivedField& derived)
{
    if (derived.mesh->domain != DomainKind::Disk) throw ConfigError("area identity needs a disk mesh");
    std::vector<double> terms(derived.size());
    for (std::size_t t = 0; t < terms.size(); ++t) terms[t] = derived.jacobian[t] * derived.mesh->areas[t];
    return {pairwise_sum(terms), kPi};
}

std::vector<char> exclude_disk_mask(const Mesh& mesh, double radius)
{
    std::vector<char> mask(mesh.triangle_count(), 0);
    for (std::size_t t = 0; t < mask.size(); ++t) mask[t] = std::abs(mesh.centroid(t)) >= radius;
    return mask;
}

nlohmann::json diagnose_options_to_json(const DiagnoseOptions& o)
{
    auto rl = nlohmann::json::array();
    for (const auto& g : o.r_list) rl.push_back({{"quantity", quantity_name(g.quantity)}, {"r", g.r}});
    nlohmann::json doc = {{"p_RR", o.p_rr},
                          {"r_list", rl},
                          {"q", o.q_declared},
                          {"dictionary_degree", o.dictionary_degree},
                          {"probe_samples", o.probe_samples},
                          {"hypothesis_tolerance", o.hypothesis_tolerance},
                          {"conclusion_tolerance", o.conclusion_tolerance},
                          {"seed", o.seed}};
    if (o.s) doc["s"] = *o.s;
    return doc;
}

DiagnoseOptions diagnose_options_from_json(const nlohmann::json& doc)
{
    try {
        DiagnoseOptions o;
        o.p_rr = doc.value("p_RR", o.p_rr);
        if (doc.contains("s") && !doc.at("s").is_null()) o.s = doc.at("s").get<double>();
        if (doc.contains("r_list")) {
            const auto& rl = doc.at("r_list");
            if (!rl.is_array()) throw ConfigError("r_list must be an array");
            o.r_list.clear();
            for (const auto& e : rl) {
                if (!e.is_object() || !e.contains("quantity") || !e.contains("r") || !e.at("r").is_number())
                    throw ConfigError("r_list entries need 'quantity' and numeric 'r'");
                o.r_list.push_back({quantity_from_name(e.at("quantity").get<std::string>()), e.at("r").get<double>()});
            }
        }
        o.q_declared = doc.value("q", o.q_declared);
        o.dictionary_degree = doc.value("dictionary_degree", o.dictionary_degree);
        o.probe_samples = doc.value("probe_samples", o.probe_samples);
        o.hypothesis_tolerance = doc.value("hypothesis_tolerance", o.hypothesis_tolerance);
        o.conclusion_tolerance = doc.value("conclusion_tolerance", o.conclusion_tolerance);
        o.seed = doc.value("seed", o.seed);
        o.validate();
        return o;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed diagnose options: ") + e.what());
    }
}

nlohmann::json lsc_to_json(const LscResult& l)
{
    return {{"energies", series_json(l.energies)},
            {"limit_energy", finite_or_null(l.limit_energy)},
            {"liminf_energy", finite_or_null(l.liminf_energy)},
            {"gap", finite_or_null(l.liminf_energy - l.limit_energy)},
            {"scale", l.scale},
            {"limit_nonpositive_area", l.limit_nonpositive_area},
            {"holds", l.holds}};
}

nlohmann::json report_to_json(const ConvergenceReport& r)
{
    auto conclusions = nlohmann::json::array();
    for (const auto& c : r.conclusions)
        conclusions.push_back({{"quantity", c.quantity},
                               {"r", c.r},
                               {"values", series_json(c.values)},
                               {"tail", finite_or_null(c.tail)},
                               {"scale", c.scale},
                               {"tolerance", c.tolerance},
                               {"below_tolerance", c.below},
                               {"excluded_area", c.excluded_area},
                               {"median_pointwise", c.median_pointwise},
                               {"p95_pointwise", c.p95_pointwise},
                               {"warnings", c.warnings}});
    nlohmann::json hyp = {
        {"energy_convergence",
         {{"passed", r.energy_convergence},
          {"gap", finite_or_null(r.energy_gap)},
          {"last_member_gap", finite_or_null(r.last_energy_gap)},
          {"limit_estimate", finite_or_null(r.energy_limit_estimate)},
          {"estimator", r.energy_estimator},
          {"scale", r.energy_scale},
          {"energies", series_json(r.energies)},
          {"limit_energy", finite_or_null(r.limit_energy)}}},
        {"weak_probe",
         {{"passed", r.weak_probe_ok},
          {"residuals", series_json(r.weak.residuals)},
          {"degree", r.weak.degree},
          {"field_count", r.weak.field_count},
          {"scale", r.weak.scale}}},
        {"jacobian_positivity", {{"passed", r.jacobian_positivity}, {"nonpositive_area_fraction", r.nonpositive_area_fraction}}},
        {"convexity_ok", r.convexity_ok},
        {"convexity",
         {{"phi", probe_to_json(r.convexity.phi)},
          {"phi_weighted", probe_to_json(r.convexity.phi_weighted)},
          {"rejected", r.convexity.rejected}}},
        {"monotonicity_ok", r.monotonicity_ok}};
    if (r.monotonicity) hyp["truncation_monotonicity"] = probe_to_json(*r.monotonicity);
    return {{"verdict", verdict_name(r.verdict)},
            {"indices", r.indices},
            {"s", r.s},
            {"options", diagnose_options_to_json(r.options)},
            {"hypotheses", hyp},
            {"conclusions", conclusions},
            {"warnings", r.warnings}};
}

void write_convergence_csv(std::ostream& out, const ConvergenceReport& r)
{
    out << "j,energy,weak_residual";
    for (const auto& c : r.conclusions) out << fmt::format(",{}_L{}", c.quantity, c.r);
    out << '\n';
    for (std::size_t i = 0; i < r.indices.size(); ++i) {
        out << fmt::format("{},{:.17g},{:.17g}", r.indices[i], r.energies[i], r.weak.residuals[i]);
        for (const auto& c : r.conclusions) out << fmt::format(",{:.17g}", c.values[i]);
        out << '\n';
    }
}

} // namespace fdist
