#include "fdist/hopf.hpp"

#include <cmath>
#include <ostream>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "fdist/functionals.hpp"

namespace fdist {

double hyperbolic_weight(Complex z)
{
    const double r2 = std::norm(z);
    if (!(r2 < 1.0)) throw DomainError(fmt::format("hyperbolic weight undefined at |z| = {} >= 1", std::sqrt(r2)));
    const double d = 1.0 - r2;
    return 1.0 / (d * d);
}

namespace {

HopfField make_field(const DerivedField& d)
{
    HopfField h;
    h.mesh = d.mesh;
    h.values.assign(d.size(), Complex{});
    h.degenerate.assign(d.size(), 0);
    return h;
}

} // namespace

HopfField hopf_differential(const DerivedField& d, double p)
{
    HopfField h = make_field(d);
    for (std::size_t t = 0; t < d.size(); ++t) {
        if (!(d.jacobian[t] > 0.0)) {
            h.degenerate[t] = 1;
            continue;
        }
        h.values[t] = std::pow(d.hs_distortion[t], p - 1.0) * d.fz[t] * std::conj(d.fzbar[t]);
    }
    return h;
}

HopfField ahlfors_hopf(const DerivedField& d, double p, std::optional<int> N, HopfWeight weight)
{
    if (N && *N < 0) throw ConfigError("ahlfors_hopf: N must be >= 0");
    HopfField h = make_field(d);
    for (std::size_t t = 0; t < d.size(); ++t) {
        const double eta = weight == HopfWeight::Hyperbolic ? hyperbolic_weight(d.image_centroid[t]) : 1.0;
        if (!(d.jacobian[t] > 0.0)) {
            h.degenerate[t] = 1;
            continue;
        }
        const double pk = p * d.hs_distortion[t];
        const double series = N ? truncated_exp(pk, *N) : std::exp(pk);
        h.values[t] = series * eta * d.fz[t] * std::conj(d.fzbar[t]);
    }
    return h;
}

HolomorphyResidual holomorphy_residual(const HopfField& field)
{
    const Mesh& mesh = *field.mesh;
    const std::size_t nv = mesh.node_count();
    std::vector<std::vector<int>> star(nv);
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t)
        for (int v : mesh.triangles[t]) star[v].push_back(static_cast<int>(t));

    HolomorphyResidual res;
    res.local.assign(nv, std::numeric_limits<double>::quiet_NaN());
    std::vector<double> lumped(nv, 0.0);
    std::vector<char> fitted(nv, 0);

    parallel_for(nv, [&](std::size_t v) {
        const auto& tris = star[v];
        if (mesh.is_boundary[v] || tris.size() < 3) return;
        // Centre the chart at the vertex for conditioning.
        Eigen::MatrixX3cd A(tris.size(), 3);
        Eigen::VectorXcd rhs(tris.size());
        double area = 0.0;
        for (std::size_t i = 0; i < tris.size(); ++i) {
            const Complex w = mesh.centroid(tris[i]) - mesh.nodes[v];
            A(i, 0) = 1.0;
            A(i, 1) = w;
            A(i, 2) = std::conj(w);
            rhs(i) = field.values[tris[i]];
            area += mesh.areas[tris[i]];
        }
        const Eigen::Vector3cd c = A.colPivHouseholderQr().solve(rhs);
        res.local[v] = std::abs(c(2));
        lumped[v] = area / 3.0;
        fitted[v] = 1;
    });

    std::vector<double> l1(nv, 0.0), l2(nv, 0.0);
    for (std::size_t v = 0; v < nv; ++v) {
        if (!fitted[v]) {
            ++res.skipped_vertices;
            continue;
        }
        ++res.fitted_vertices;
        l1[v] = res.local[v] * lumped[v];
        l2[v] = res.local[v] * res.local[v] * lumped[v];
    }
    res.l1 = pairwise_sum(l1);
    res.l2 = std::sqrt(pairwise_sum(l2));
    res.fitted_area = pairwise_sum(lumped);
    return res;
}

double l1_norm(const HopfField& field)
{
    std::vector<double> terms(field.values.size());
    for (std::size_t t = 0; t < terms.size(); ++t) terms[t] = std::abs(field.values[t]) * field.mesh->areas[t];
    return pairwise_sum(terms);
}

double sup_gap(const HopfField& a, const HopfField& b, const std::vector<char>& mask)
{
    if (a.values.size() != b.values.size()) throw ConfigError("sup_gap: fields live on different meshes");
    double gap = 0.0;
    for (std::size_t t = 0; t < a.values.size(); ++t)
        if (mask.empty() || mask[t]) gap = std::max(gap, std::abs(a.values[t] - b.values[t]));
    return gap;
}

void write_hopf_csv(std::ostream& out, const HopfField& field)
{
    out << "tri_id,re,im,area\n";
    for (std::size_t t = 0; t < field.values.size(); ++t)
        out << fmt::format("{},{:.17g},{:.17g},{:.17g}\n", t, field.values[t].real(), field.values[t].imag(),
                           field.mesh->areas[t]);
}

} // namespace fdist
