#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fdist/functionals.hpp"

namespace fdist {

enum class Preconditioner {
    None,       // Euclidean nodal gradient
    Laplacian,  // gradient in the H^1 metric of the P1 stiffness matrix
};

struct MinimizeConfig {
    int max_iterations = 1000;
    double gradient_tolerance = 1e-6;
    double initial_step = 1.0;
    double backtracking_factor = 0.5;
    /// Smallest per-triangle J an accepted iterate may have. 0 selects
    /// 1e-8 * median(J) of the initial map.
    double jacobian_floor = 0.0;
    std::uint64_t seed = 0;
    Preconditioner preconditioner = Preconditioner::Laplacian;

    void validate() const;
};

enum class BoundaryKind { Identity, CircleDiffeo, Explicit };

/// Dirichlet data on the mesh boundary.
struct BoundaryData {
    BoundaryKind kind = BoundaryKind::Identity;
    /// circle_diffeo: theta -> theta + sum_n a_n sin(n theta) + b_n cos(n theta), n = 1, 2, ...
    std::vector<double> a;
    std::vector<double> b;
    /// explicit: one value per entry of mesh.boundary_nodes, in that order.
    std::vector<Complex> values;

    /// For circle_diffeo, checks that the angle map is increasing on a
    /// 4096-point grid. Throws ConfigError otherwise.
    void validate() const;
    /// Full-length nodal array; interior entries are zero.
    std::vector<Complex> nodal_values(const Mesh& mesh) const;
};

BoundaryData circle_diffeo(std::vector<double> a, std::vector<double> b = {});

/// Discrete harmonic extension (P1 stiffness) of the boundary data.
MappingField harmonic_extension(MeshPtr mesh, const BoundaryData& boundary);

/// Assembled P1 stiffness matrix entries (row, col, value), for tests and tools.
struct StiffnessEntry {
    int row, col;
    double value;
};
std::vector<StiffnessEntry> stiffness_entries(const Mesh& mesh);

/// Exact gradient of energy(spec, .) with respect to interior nodal values,
/// as dE/dRe + i dE/dIm. Boundary entries are zero. Throws DomainError naming
/// the worst triangle when some J <= jacobian_floor.
std::vector<Complex> energy_gradient(const FunctionalSpec& spec, const MappingField& mapping,
                                     double jacobian_floor = 0.0);

struct TraceRow {
    int iteration = 0;
    double energy = 0.0;
    double grad_norm = 0.0;
    double min_jacobian = 0.0;
    double step = 0.0;
};

struct MinimizeResult {
    MappingField mapping;
    std::vector<TraceRow> trace;
    bool converged = false;  // gradient tolerance reached
    bool stalled = false;    // line search fell below the minimum step
    double jacobian_floor = 0.0;
    double energy() const { return trace.back().energy; }
};

/// Preconditioned gradient descent with backtracking. Steps are accepted only
/// when the energy decreases (Armijo) and min J stays above the floor. Starts
/// from `initial` when given, else from the harmonic extension.
MinimizeResult minimize_energy(const FunctionalSpec& spec, MeshPtr mesh, const BoundaryData& boundary,
                               const MinimizeConfig& config, const std::optional<MappingField>& initial = {});

struct SweepEntry {
    int N = 0;
    MinimizeResult result;
};

/// Minimises TruncExp(p, N) for each N in increasing order, warm-starting each
/// run from the previous minimiser. `base` supplies norm, jac_exp and weight.
std::vector<SweepEntry> truncation_sweep(double p, const std::vector<int>& N_list, MeshPtr mesh,
                                         const BoundaryData& boundary, const MinimizeConfig& config,
                                         const FunctionalSpec& base = {});

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace);

nlohmann::json minimize_config_to_json(const MinimizeConfig& config);
MinimizeConfig minimize_config_from_json(const nlohmann::json& doc);
nlohmann::json boundary_to_json(const BoundaryData& boundary);
BoundaryData boundary_from_json(const nlohmann::json& doc);

} // namespace fdist
