#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fdist/functionals.hpp"

namespace fdist {

/// Members f_j on one mesh together with the designated limit f.
struct SequenceHandle {
    MeshPtr mesh;
    std::vector<int> indices;  // j of each member
    std::vector<MappingField> members;
    MappingField limit;
    /// Optional tabulated weights eta_j (one per member) and eta for the limit.
    std::vector<std::shared_ptr<const std::vector<double>>> member_weights;
    std::shared_ptr<const std::vector<double>> limit_weight;
    /// Optional truncation order N_j per member; the limit then uses ExpP.
    std::vector<int> truncation_orders;
    nlohmann::json metadata = nlohmann::json::object();

    /// Throws ConfigError on an empty list, foreign meshes or length mismatches.
    void validate() const;
    std::size_t size() const { return members.size(); }
};

/// Spec of member i: N_j substituted for TruncExp, eta_j for tabulated weights.
FunctionalSpec member_spec(const FunctionalSpec& spec, const SequenceHandle& seq, std::size_t i);
/// Spec of the limit: ExpP replaces TruncExp when truncation orders are present.
FunctionalSpec limit_spec(const FunctionalSpec& spec, const SequenceHandle& seq);

enum class Quantity {
    Df,          // sqrt(|f_z|^2 + |f_zbar|^2)
    Fz,
    Fzbar,
    Jacobian,
    Beltrami,
    Distortion,  // Hilbert-Schmidt K
};

const char* quantity_name(Quantity q);
Quantity quantity_from_name(const std::string& name);

struct LrGap {
    Quantity quantity = Quantity::Df;
    double r = 2.0;
    std::vector<double> values;         // one per member
    std::vector<double> excluded_area;  // per member: undefined mu or infinite K
    std::vector<std::string> warnings;
    /// Pointwise proxy for the last member: median and 95th percentile of
    /// the per-triangle difference.
    double median_pointwise = 0.0;
    double p95_pointwise = 0.0;
};

/// (sum_t |q_j - q|^r area_t)^(1/r) over `mask` (empty = all triangles).
/// r >= q_declared for Df and r >= 1 for J only produce warnings.
/// Throws DomainError when the mask selects nothing.
LrGap lr_gap(const SequenceHandle& seq, Quantity quantity, double r, const std::vector<char>& mask = {},
             double q_declared = 2.0);

/// L^r (quasi-)norm of a quantity of one map, same conventions as lr_gap.
double lr_norm(const DerivedField& derived, Quantity quantity, double r, const std::vector<char>& mask = {});

struct WeakProbeResult {
    int degree = 6;
    std::size_t field_count = 0;
    std::vector<double> residuals;  // one per member
    double scale = 1.0;             // max(||Df||_1, ||J||_1) of the limit
};

/// Tests f_z, f_zbar and J differences against Legendre tensor products up to
/// `degree` in each variable times a cutoff vanishing on the boundary.
WeakProbeResult weak_probe(const SequenceHandle& seq, int degree = 6);

struct LscResult {
    std::vector<double> energies;
    double limit_energy = 0.0;
    double liminf_energy = 0.0;  // minimum over the tail half
    double scale = 1.0;
    double limit_nonpositive_area = 0.0;
    bool holds = false;
};

LscResult lsc_check(const FunctionalSpec& spec, const SequenceHandle& seq);

/// One conclusion measurement requested from the diagnosis.
struct GapRequest {
    Quantity quantity;
    double r;
};

struct DiagnoseOptions {
    double p_rr = 2.0;
    std::optional<double> s;  // default_s(p_rr) when absent
    std::vector<GapRequest> r_list = {{Quantity::Df, 1.5}, {Quantity::Jacobian, 0.5}, {Quantity::Beltrami, 1.0}};
    double q_declared = 2.0;
    int dictionary_degree = 6;
    std::size_t probe_samples = 20000;
    double hypothesis_tolerance = 1e-3;
    double conclusion_tolerance = 1e-2;
    std::uint64_t seed = 1;

    void validate() const;
};

enum class Verdict { StrongConvergence, EnergyGap, WeakProbeFail, JacobianDegenerate, Inconclusive };
const char* verdict_name(Verdict v);

struct ConclusionRow {
    std::string quantity;  // quantity name, or "Phi" for the integrand values
    double r = 1.0;
    std::vector<double> values;
    double tail = 0.0;
    double scale = 1.0;
    double tolerance = 0.0;
    bool below = false;
    double excluded_area = 0.0;
    double median_pointwise = 0.0;
    double p95_pointwise = 0.0;
    std::vector<std::string> warnings;
};

struct ConvergenceReport {
    DiagnoseOptions options;
    double s = 0.0;
    std::vector<int> indices;
    // hypotheses
    std::vector<double> energies;  // integral of Phi_j^p (weighted)
    double limit_energy = 0.0;
    double energy_limit_estimate = 0.0;  // estimate of lim E_j
    std::string energy_estimator;        // "aitken" or "last"
    double energy_gap = 0.0;             // estimate - E_limit
    double last_energy_gap = 0.0;        // E_last - E_limit
    double energy_scale = 1.0;
    bool energy_convergence = false;
    WeakProbeResult weak;
    bool weak_probe_ok = false;
    double nonpositive_area_fraction = 0.0;
    bool jacobian_positivity = false;
    ConvexityProbeReport convexity;
    bool convexity_ok = false;
    std::optional<ProbeReport> monotonicity;
    bool monotonicity_ok = true;
    // conclusions
    std::vector<ConclusionRow> conclusions;
    Verdict verdict = Verdict::Inconclusive;
    std::vector<std::string> warnings;
};

/// Limit of a sequence sampled at geometrically growing j: Aitken's delta-squared
/// step on the last three values when their differences shrink by a ratio in
/// (0, 0.8], otherwise the last value.
double sequence_limit_estimate(const std::vector<double>& values, std::string& estimator);

ConvergenceReport radon_riesz_diagnose(const FunctionalSpec& spec, const SequenceHandle& seq,
                                       const DiagnoseOptions& options = {});

struct GoodSet {
    std::vector<char> mask;
    std::size_t count = 0;
    double area = 0.0;
    double complement_area = 0.0;
};

/// Triangles with eps < J < 1/eps and phi < 1/eps. Requires 0 < eps < 1.
GoodSet good_set(const DerivedField& derived, const std::vector<double>& phi, double eps);

struct SobolevNorm {
    double value_part = 0.0;       // sum |f|^q over node-lumped areas
    double derivative_part = 0.0;  // sum (|f_z| + |f_zbar|)^q area
    double norm = 0.0;             // (value_part + derivative_part)^(1/q)
};

SobolevNorm sobolev_norm(const MappingField& mapping, double q, const std::vector<char>& mask = {});

/// Luxemburg norm of |f_z| + |f_zbar| for P(t) = t^2 / log(e + t).
double orlicz_norm(const MappingField& mapping, const std::vector<char>& mask = {});
/// P(t) = t^2 / log(e + t)
double orlicz_function(double t);

struct AreaIdentity {
    double integral = 0.0;
    double target = kPi;
};

/// Integral of J over a disk mesh against pi. ConfigError on other domains.
AreaIdentity jacobian_area_identity(const DerivedField& derived);

/// Triangles whose centroid satisfies |z| >= radius.
std::vector<char> exclude_disk_mask(const Mesh& mesh, double radius);

nlohmann::json report_to_json(const ConvergenceReport& report);
nlohmann::json diagnose_options_to_json(const DiagnoseOptions& options);
DiagnoseOptions diagnose_options_from_json(const nlohmann::json& doc);
nlohmann::json lsc_to_json(const LscResult& lsc);

/// Gap-versus-j series: j, energy, weak residual, then one column per conclusion row.
void write_convergence_csv(std::ostream& out, const ConvergenceReport& report);

} // namespace fdist
