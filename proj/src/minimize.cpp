#include "fdist/minimize.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <Eigen/Sparse>
#include <fmt/format.h>

#include "fdist/hopf.hpp"

namespace fdist {

namespace {

constexpr double kArmijo = 1e-4;
constexpr double kMinStep = 1e-14;

using SparseMatrix = Eigen::SparseMatrix<double>;

// Stiffness restricted to interior nodes plus the coupling to boundary nodes.
class InteriorLaplacian {
public:
    explicit InteriorLaplacian(const Mesh& mesh) : index_(mesh.node_count(), -1)
    {
        for (std::size_t v = 0; v < mesh.node_count(); ++v)
            if (!mesh.is_boundary[v]) {
                index_[v] = static_cast<int>(interior_.size());
                interior_.push_back(static_cast<int>(v));
            }
        std::vector<Eigen::Triplet<double>> ii, ib;
        for (const auto& e : stiffness_entries(mesh)) {
            const int r = index_[e.row];
            if (r < 0) continue;
            const int c = index_[e.col];
            if (c >= 0) ii.emplace_back(r, c, e.value);
            else ib.emplace_back(r, e.col, e.value);
        }
        const auto n = static_cast<Eigen::Index>(interior_.size());
        kii_.resize(n, n);
        kii_.setFromTriplets(ii.begin(), ii.end());
        kib_.resize(n, static_cast<Eigen::Index>(mesh.node_count()));
        kib_.setFromTriplets(ib.begin(), ib.end());
        if (n > 0) {
            solver_.compute(kii_);
            if (solver_.info() != Eigen::Success) throw InternalError("stiffness factorization failed");
        }
    }

    std::size_t interior_count() const { return interior_.size(); }

    /// Solves K_II u = rhs on interior nodes for both real and imaginary parts.
    std::vector<Complex> solve(const std::vector<Complex>& rhs_interior) const
    {
        const auto n = static_cast<Eigen::Index>(interior_.size());
        Eigen::VectorXd re(n), im(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            re(i) = rhs_interior[i].real();
            im(i) = rhs_interior[i].imag();
        }
        const Eigen::VectorXd ure = solver_.solve(re), uim = solver_.solve(im);
        std::vector<Complex> out(n);
        for (Eigen::Index i = 0; i < n; ++i) out[i] = {ure(i), uim(i)};
        return out;
    }

    MappingField extend(MeshPtr mesh, const std::vector<Complex>& nodal) const
    {
        const auto nn = static_cast<Eigen::Index>(mesh->node_count());
        Eigen::VectorXd bre = Eigen::VectorXd::Zero(nn), bim = Eigen::VectorXd::Zero(nn);
        for (int v : mesh->boundary_nodes) {
            bre(v) = nodal[v].real();
            bim(v) = nodal[v].imag();
        }
        const Eigen::VectorXd rre = -(kib_ * bre), rim = -(kib_ * bim);
        std::vector<Complex> rhs(interior_.size());
        for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = {rre(i), rim(i)};
        const auto u = solve(rhs);
        std::vector<Complex> values(mesh->node_count());
        for (int v : mesh->boundary_nodes) values[v] = nodal[v];
        for (std::size_t i = 0; i < interior_.size(); ++i) values[interior_[i]] = u[i];
        return MappingField(std::move(mesh), std::move(values));
    }

    /// Preconditioned direction -K^{-1} g (interior) scattered to nodes, plus
    /// the dual norm sqrt(<g, K^{-1} g>).
    std::pair<std::vector<Complex>, double> direction(const std::vector<Complex>& grad) const
    {
        std::vector<Complex> g(interior_.size());
        for (std::size_t i = 0; i < interior_.size(); ++i) g[i] = grad[interior_[i]];
        const auto u = solve(g);
        std::vector<double> dots(interior_.size());
        std::vector<Complex> dir(grad.size());
        for (std::size_t i = 0; i < interior_.size(); ++i) {
            dir[interior_[i]] = -u[i];
            dots[i] = g[i].real() * u[i].real() + g[i].imag() * u[i].imag();
        }
        return {dir, std::sqrt(std::max(0.0, pairwise_sum(dots)))};
    }

private:
    std::vector<int> index_;
    std::vector<int> interior_;
    SparseMatrix kii_, kib_;
    Eigen::SimplicialLDLT<SparseMatrix> solver_;
};

double min_jacobian(const DerivedField& d)
{
    return d.size() ? *std::min_element(d.jacobian.begin(), d.jacobian.end()) : 0.0;
}

double median(std::vector<double> v)
{
    if (v.empty()) return 0.0;
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
}

double real_dot(const std::vector<Complex>& a, const std::vector<Complex>& b)
{
    std::vector<double> terms(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) terms[i] = a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
    return pairwise_sum(terms);
}

} // namespace

void MinimizeConfig::validate() const
{
    if (max_iterations < 0) throw ConfigError("max_iterations must be >= 0");
    if (!(gradient_tolerance > 0.0)) throw ConfigError("gradient_tolerance must be > 0");
    if (!(initial_step > 0.0)) throw ConfigError("initial_step must be > 0");
    if (!(backtracking_factor > 0.0 && backtracking_factor < 1.0))
        throw ConfigError("backtracking_factor must lie in (0, 1)");
    if (!(jacobian_floor >= 0.0)) throw ConfigError("jacobian_floor must be >= 0 (0 = automatic)");
}

void BoundaryData::validate() const
{
    if (kind != BoundaryKind::CircleDiffeo) return;
    constexpr int kGrid = 4096;
    for (int i = 0; i < kGrid; ++i) {
        const double theta = 2.0 * kPi * i / kGrid;
        double derivative = 1.0;
        for (std::size_t n = 1; n <= std::max(a.size(), b.size()); ++n) {
            const double an = n <= a.size() ? a[n - 1] : 0.0;
            const double bn = n <= b.size() ? b[n - 1] : 0.0;
            derivative += n * (an * std::cos(n * theta) - bn * std::sin(n * theta));
        }
        if (!(derivative > 0.0))
            throw ConfigError(fmt::format("circle_diffeo is not increasing at theta = {}", theta));
    }
}

std::vector<Complex> BoundaryData::nodal_values(const Mesh& mesh) const
{
    std::vector<Complex> out(mesh.node_count());
    switch (kind) {
    case BoundaryKind::Identity:
        for (int v : mesh.boundary_nodes) out[v] = mesh.nodes[v];
        break;
    case BoundaryKind::CircleDiffeo:
        if (mesh.domain != DomainKind::Disk) throw ConfigError("circle_diffeo boundary data needs a disk mesh");
        for (int v : mesh.boundary_nodes) {
            const double theta = std::arg(mesh.nodes[v]);
            double phi = theta;
            for (std::size_t n = 1; n <= std::max(a.size(), b.size()); ++n) {
                const double an = n <= a.size() ? a[n - 1] : 0.0;
                const double bn = n <= b.size() ? b[n - 1] : 0.0;
                phi += an * std::sin(n * theta) + bn * std::cos(n * theta);
            }
            out[v] = std::polar(1.0, phi);
        }
        break;
    case BoundaryKind::Explicit:
        if (values.size() != mesh.boundary_nodes.size())
            throw ConfigError(fmt::format("explicit boundary data has {} values for {} boundary nodes",
                                          values.size(), mesh.boundary_nodes.size()));
        for (std::size_t i = 0; i < values.size(); ++i) out[mesh.boundary_nodes[i]] = values[i];
        break;
    }
    return out;
}

BoundaryData circle_diffeo(std::vector<double> a, std::vector<double> b)
{
    BoundaryData data;
    data.kind = BoundaryKind::CircleDiffeo;
    data.a = std::move(a);
    data.b = std::move(b);
    data.validate();
    return data;
}

std::vector<StiffnessEntry> stiffness_entries(const Mesh& mesh)
{
    std::vector<StiffnessEntry> out;
    out.reserve(9 * mesh.triangle_count());
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
        const auto& tri = mesh.triangles[t];
        const TriangleFrame fr = triangle_frame(mesh.nodes[tri[0]], mesh.nodes[tri[1]], mesh.nodes[tri[2]]);
        // grad(phi_i) . grad(phi_j) = 4 Re(conj(dzbar_i) dzbar_j)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                out.push_back({tri[i], tri[j], 4.0 * (std::conj(fr.dzbar[i]) * fr.dzbar[j]).real() * mesh.areas[t]});
    }
    return out;
}

MappingField harmonic_extension(MeshPtr mesh, const BoundaryData& boundary)
{
    boundary.validate();
    const InteriorLaplacian lap(*mesh);
    return lap.extend(mesh, boundary.nodal_values(*mesh));
}

std::vector<Complex> energy_gradient(const FunctionalSpec& spec, const MappingField& mapping, double jacobian_floor)
{
    spec.validate();
    const Mesh& mesh = mapping.mesh();
    const DerivedField d = wirtinger_derivatives(mapping);
    {
        const auto worst = std::min_element(d.jacobian.begin(), d.jacobian.end());
        if (worst != d.jacobian.end() && !(*worst > jacobian_floor))
            throw DomainError(fmt::format("energy_gradient: triangle {} has J = {:.6g} <= floor {:.6g}",
                                          worst - d.jacobian.begin(), *worst, jacobian_floor));
    }
    if (spec.family == Family::Custom) throw ConfigError("energy_gradient: custom families have no gradient");

    const auto eta = weight_values(spec, d);
    std::vector<std::array<Complex, 3>> local(d.size());
    parallel_for(d.size(), [&](std::size_t t) {
        const auto& tri = mesh.triangles[t];
        const TriangleFrame fr = triangle_frame(mesh.nodes[tri[0]], mesh.nodes[tri[1]], mesh.nodes[tri[2]]);
        const Complex fz = d.fz[t], fzb = d.fzbar[t];
        const double y = d.jacobian[t];
        Complex gz{}, gzb{};
        double value = 0.0;
        if (spec.norm == NormChoice::HilbertSchmidt) {
            const double a = std::norm(fz), b = std::norm(fzb);
            const PhiJet j = phi_jet(spec, 2.0 * (a + b), y);
            value = j.value;
            gz = 2.0 * fz * (2.0 * j.d_xsq + j.d_y);
            gzb = 2.0 * fzb * (2.0 * j.d_xsq - j.d_y);
        } else {
            const double m = std::abs(fz), n = std::abs(fzb), x = m + n;
            const PhiJet j = phi_jet(spec, x * x, y);
            value = j.value;
            if (m > 0.0) gz = fz / m * (2.0 * x * j.d_xsq + 2.0 * m * j.d_y);
            if (n > 0.0) gzb = fzb / n * (2.0 * x * j.d_xsq - 2.0 * n * j.d_y);
        }
        const double scale = eta[t] * mesh.areas[t];
        Complex weight_term{};
        if (spec.weight == WeightKind::Hyperbolic && spec.weight_at == WeightPlacement::Image) {
            // d eta(c) with c the mean of the three nodal values.
            const Complex c = d.image_centroid[t];
            const double q = 1.0 - std::norm(c);
            weight_term = value * mesh.areas[t] * (4.0 * c / (q * q * q)) / 3.0;
        }
        for (int k = 0; k < 3; ++k)
            local[t][k] = scale * (gz * std::conj(fr.dz[k]) + gzb * std::conj(fr.dzbar[k])) + weight_term;
    });

    std::vector<Complex> grad(mesh.node_count());
    for (std::size_t t = 0; t < d.size(); ++t)
        for (int k = 0; k < 3; ++k) grad[mesh.triangles[t][k]] += local[t][k];
    for (int v : mesh.boundary_nodes) grad[v] = {0.0, 0.0};
    return grad;
}

MinimizeResult minimize_energy(const FunctionalSpec& spec, MeshPtr mesh, const BoundaryData& boundary,
                               const MinimizeConfig& config, const std::optional<MappingField>& initial)
{
    spec.validate();
    config.validate();
    boundary.validate();
    const InteriorLaplacian lap(*mesh);

    MinimizeResult res;
    if (initial) {
        if (initial->mesh_ptr() != mesh && initial->mesh().node_count() != mesh->node_count())
            throw ConfigError("warm start lives on a different mesh");
        auto values = initial->values();
        const auto bnd = boundary.nodal_values(*mesh);
        for (int v : mesh->boundary_nodes) values[v] = bnd[v];
        res.mapping = MappingField(mesh, std::move(values));
    } else {
        res.mapping = lap.extend(mesh, boundary.nodal_values(*mesh));
    }

    DerivedField derived = wirtinger_derivatives(res.mapping);
    const double start_min_j = min_jacobian(derived);
    res.jacobian_floor = config.jacobian_floor > 0.0 ? config.jacobian_floor : 1e-8 * median(derived.jacobian);
    if (!(start_min_j >= res.jacobian_floor) || !(res.jacobian_floor > 0.0))
        throw DomainError(fmt::format("initialization: initial map has min J = {:.6g} below floor {:.6g}",
                                      start_min_j, res.jacobian_floor));

    double current = energy(spec, derived);
    if (!std::isfinite(current)) throw DomainError("initialization: initial energy is not finite");

    auto gradient_and_direction = [&](const MappingField& f) {
        auto g = energy_gradient(spec, f, 0.0);
        if (config.preconditioner == Preconditioner::Laplacian) {
            auto [dir, norm] = lap.direction(g);
            return std::tuple{std::move(g), std::move(dir), norm};
        }
        std::vector<Complex> dir(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) dir[i] = -g[i];
        const double norm = std::sqrt(real_dot(g, g));
        return std::tuple{std::move(g), std::move(dir), norm};
    };

    auto [grad, dir, gnorm] = gradient_and_direction(res.mapping);
    res.trace.push_back({0, current, gnorm, start_min_j, 0.0});
    double step = config.initial_step;

    for (int it = 1; it <= config.max_iterations; ++it) {
        if (gnorm < config.gradient_tolerance) {
            res.converged = true;
            break;
        }
        const double slope = real_dot(grad, dir);  // < 0 for a descent direction
        bool accepted = false;
        while (step >= kMinStep) {
            std::vector<Complex> trial = res.mapping.values();
            for (std::size_t i = 0; i < trial.size(); ++i) trial[i] += step * dir[i];
            MappingField candidate(mesh, std::move(trial));
            DerivedField cd = wirtinger_derivatives(candidate);
            const double mj = min_jacobian(cd);
            if (mj >= res.jacobian_floor) {
                const double e = energy(spec, cd);
                if (e < current && e <= current + kArmijo * step * slope) {
                    res.mapping = std::move(candidate);
                    current = e;
                    res.trace.push_back({it, e, 0.0, mj, step});
                    accepted = true;
                    break;
                }
            }
            step *= config.backtracking_factor;
        }
        if (!accepted) {
            res.stalled = true;
            break;
        }
        std::tie(grad, dir, gnorm) = gradient_and_direction(res.mapping);
        res.trace.back().grad_norm = gnorm;
        step /= config.backtracking_factor;
    }
    if (!res.converged && !res.stalled && gnorm < config.gradient_tolerance) res.converged = true;
    return res;
}

std::vector<SweepEntry> truncation_sweep(double p, const std::vector<int>& N_list, MeshPtr mesh,
                                         const BoundaryData& boundary, const MinimizeConfig& config,
                                         const FunctionalSpec& base)
{
    if (N_list.empty()) throw ConfigError("truncation_sweep: empty N list");
    for (std::size_t i = 1; i < N_list.size(); ++i)
        if (N_list[i] <= N_list[i - 1]) throw ConfigError("truncation_sweep: N list must be increasing");
    std::vector<SweepEntry> out;
    std::optional<MappingField> warm;
    for (int N : N_list) {
        FunctionalSpec spec = base;
        spec.family = Family::TruncExp;
        spec.p = p;
        spec.N = N;
        SweepEntry entry{N, minimize_energy(spec, mesh, boundary, config, warm)};
        warm = entry.result.mapping;
        out.push_back(std::move(entry));
    }
    return out;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace)
{
    out << "iteration,energy,grad_norm,min_J,step\n";
    for (const auto& r : trace)
        out << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g}\n", r.iteration, r.energy, r.grad_norm,
                           r.min_jacobian, r.step);
}

nlohmann::json minimize_config_to_json(const MinimizeConfig& c)
{
    return {{"max_iterations", c.max_iterations},
            {"gradient_tolerance", c.gradient_tolerance},
            {"initial_step", c.initial_step},
            {"backtracking_factor", c.backtracking_factor},
            {"jacobian_floor", c.jacobian_floor},
            {"seed", c.seed},
            {"preconditioner", c.preconditioner == Preconditioner::Laplacian ? "laplacian" : "none"}};
}

MinimizeConfig minimize_config_from_json(const nlohmann::json& doc)
{
    try {
        MinimizeConfig c;
        c.max_iterations = doc.value("max_iterations", c.max_iterations);
        c.gradient_tolerance = doc.value("gradient_tolerance", c.gradient_tolerance);
        c.initial_step = doc.value("initial_step", c.initial_step);
        c.backtracking_factor = doc.value("backtracking_factor", c.backtracking_factor);
        c.jacobian_floor = doc.value("jacobian_floor", c.jacobian_floor);
        c.seed = doc.value("seed", c.seed);
        const std::string pre = doc.value("preconditioner", "laplacian");
        if (pre == "laplacian") c.preconditioner = Preconditioner::Laplacian;
        else if (pre == "none") c.preconditioner = Preconditioner::None;
        else throw ConfigError("unknown preconditioner '" + pre + "'");
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed minimize config: ") + e.what());
    }
}

nlohmann::json boundary_to_json(const BoundaryData& b)
{
    switch (b.kind) {
    case BoundaryKind::Identity: return {{"kind", "identity"}};
    case BoundaryKind::CircleDiffeo: return {{"kind", "circle_diffeo"}, {"a", b.a}, {"b", b.b}};
    case BoundaryKind::Explicit: {
        auto vals = nlohmann::json::array();
        for (const auto& v : b.values) vals.push_back({v.real(), v.imag()});
        return {{"kind", "explicit"}, {"values", vals}};
    }
    }
    return {};
}

BoundaryData boundary_from_json(const nlohmann::json& doc)
{
    try {
        BoundaryData b;
        const std::string kind = doc.value("kind", "identity");
        if (kind == "identity") {
            b.kind = BoundaryKind::Identity;
        } else if (kind == "circle_diffeo") {
            b.kind = BoundaryKind::CircleDiffeo;
            b.a = doc.value("a", std::vector<double>{});
            b.b = doc.value("b", std::vector<double>{});
        } else if (kind == "explicit") {
            b.kind = BoundaryKind::Explicit;
            for (const auto& v : doc.at("values")) b.values.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
        } else {
            throw ConfigError("unknown boundary kind '" + kind + "'");
        }
        b.validate();
        return b;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed boundary data: ") + e.what());
    }
}

} // namespace fdist
