#include "fdist/fields.hpp"

#include <cmath>
#include <ostream>

#include <fmt/format.h>

namespace fdist {

MappingField::MappingField(MeshPtr mesh, std::vector<Complex> values)
    : mesh_(std::move(mesh)), values_(std::move(values))
{
    if (!mesh_) throw ConfigError("mapping field without mesh");
    if (values_.size() != mesh_->node_count())
        throw ConfigError(fmt::format("mapping has {} values for {} nodes", values_.size(), mesh_->node_count()));
    for (std::size_t i = 0; i < values_.size(); ++i)
        if (!std::isfinite(values_[i].real()) || !std::isfinite(values_[i].imag()))
            throw ConfigError(fmt::format("mapping value at node {} is not finite", i));
}

TriangleFrame triangle_frame(Complex z0, Complex z1, Complex z2)
{
    // Solve f1 - f0 = B e1 + C conj(e1), f2 - f0 = B e2 + C conj(e2).
    const Complex e1 = z1 - z0, e2 = z2 - z0;
    const Complex det = e1 * std::conj(e2) - std::conj(e1) * e2;  // = -4i * area
    if (std::abs(det) == 0.0) throw InternalError("degenerate triangle");
    TriangleFrame fr;
    fr.dz[1] = std::conj(e2) / det;
    fr.dz[2] = -std::conj(e1) / det;
    fr.dz[0] = -(fr.dz[1] + fr.dz[2]);
    fr.dzbar[1] = -e2 / det;
    fr.dzbar[2] = e1 / det;
    fr.dzbar[0] = -(fr.dzbar[1] + fr.dzbar[2]);
    return fr;
}

std::vector<TriangleFrame> triangle_frames(const Mesh& mesh)
{
    std::vector<TriangleFrame> frames(mesh.triangle_count());
    parallel_for(frames.size(), [&](std::size_t t) {
        const auto& tri = mesh.triangles[t];
        frames[t] = triangle_frame(mesh.nodes[tri[0]], mesh.nodes[tri[1]], mesh.nodes[tri[2]]);
    });
    return frames;
}

double DerivedField::hs_norm(std::size_t t) const
{
    return std::sqrt(2.0 * (std::norm(fz[t]) + std::norm(fzbar[t])));
}

double DerivedField::op_norm(std::size_t t) const { return std::abs(fz[t]) + std::abs(fzbar[t]); }

DerivedField wirtinger_derivatives(const MappingField& mapping)
{
    const Mesh& mesh = mapping.mesh();
    const auto& f = mapping.values();
    const std::size_t n = mesh.triangle_count();
    DerivedField d;
    d.mesh = mapping.mesh_ptr();
    d.fz.resize(n);
    d.fzbar.resize(n);
    d.jacobian.resize(n);
    d.hs_distortion.resize(n);
    d.op_distortion.resize(n);
    d.beltrami.resize(n);
    d.beltrami_defined.resize(n);
    d.image_centroid.resize(n);

    parallel_for(n, [&](std::size_t t) {
        const auto& tri = mesh.triangles[t];
        const TriangleFrame fr = triangle_frame(mesh.nodes[tri[0]], mesh.nodes[tri[1]], mesh.nodes[tri[2]]);
        Complex fz{}, fzb{};
        for (int k = 0; k < 3; ++k) {
            fz += fr.dz[k] * f[tri[k]];
            fzb += fr.dzbar[k] * f[tri[k]];
        }
        const double a = std::norm(fz), b = std::norm(fzb);
        const double jac = a - b;
        d.fz[t] = fz;
        d.fzbar[t] = fzb;
        d.jacobian[t] = jac;
        if (jac > 0.0) {
            d.hs_distortion[t] = 2.0 * (a + b) / jac;
            const double op = std::abs(fz) + std::abs(fzb);
            d.op_distortion[t] = op * op / jac;
        } else {
            d.hs_distortion[t] = kInfinity;
            d.op_distortion[t] = kInfinity;
        }
        // f_z below round-off relative to |Df| counts as zero.
        if (a > 1e-24 * (a + b)) {
            d.beltrami[t] = fzb / fz;
            d.beltrami_defined[t] = 1;
        } else {
            d.beltrami[t] = {0.0, 0.0};
            d.beltrami_defined[t] = 0;
        }
        d.image_centroid[t] = (f[tri[0]] + f[tri[1]] + f[tri[2]]) / 3.0;
    });
    return d;
}

FiniteDistortionReport finite_distortion_report(const DerivedField& derived)
{
    const auto& area = derived.areas();
    const std::size_t n = derived.size();
    std::vector<double> bad(n, 0.0), weighted_k(n, 0.0), good(n, 0.0), weighted_j(n, 0.0);
    FiniteDistortionReport rep;
    for (std::size_t t = 0; t < n; ++t) {
        weighted_j[t] = derived.jacobian[t] * area[t];
        if (derived.jacobian[t] <= 0.0) {
            ++rep.nonpositive_count;
            bad[t] = area[t];
        } else {
            good[t] = area[t];
            weighted_k[t] = derived.hs_distortion[t] * area[t];
            rep.ess_sup_op_distortion = std::max(rep.ess_sup_op_distortion, derived.op_distortion[t]);
        }
    }
    rep.nonpositive_area = pairwise_sum(bad);
    const double good_area = pairwise_sum(good);
    rep.mean_hs_distortion = good_area > 0.0 ? pairwise_sum(weighted_k) / good_area : kInfinity;
    rep.mean_jacobian = pairwise_sum(weighted_j) / derived.mesh->total_area();
    rep.finite_distortion = rep.nonpositive_area == 0.0;
    return rep;
}

MappingField sample_analytic(MeshPtr mesh, const AnalyticMap& map)
{
    if (!mesh) throw ConfigError("sample_analytic: null mesh");
    std::vector<Complex> values(mesh->node_count());
    parallel_for(values.size(), [&](std::size_t v) { values[v] = evaluate(map, mesh->nodes[v]); });
    return MappingField(std::move(mesh), std::move(values));
}

void write_derived_csv(std::ostream& out, const DerivedField& d)
{
    out << "tri_id,re_fz,im_fz,re_fzbar,im_fzbar,J,K_hs,K_op,re_mu,im_mu,area\n";
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t t = 0; t < d.size(); ++t) {
        const Complex mu = d.beltrami_defined[t] ? d.beltrami[t] : Complex{nan, nan};
        out << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", t,
                           d.fz[t].real(), d.fz[t].imag(), d.fzbar[t].real(), d.fzbar[t].imag(), d.jacobian[t],
                           d.hs_distortion[t], d.op_distortion[t], mu.real(), mu.imag(), d.areas()[t]);
    }
}

nlohmann::json mapping_to_json(const MappingField& mapping)
{
    auto values = nlohmann::json::array();
    for (const auto& v : mapping.values()) values.push_back({v.real(), v.imag()});
    return {{"values", std::move(values)}};
}

MappingField mapping_from_json(MeshPtr mesh, const nlohmann::json& doc)
{
    try {
        std::vector<Complex> values;
        for (const auto& v : doc.at("values")) values.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
        return MappingField(std::move(mesh), std::move(values));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed mapping JSON: ") + e.what());
    }
}

} // namespace fdist
