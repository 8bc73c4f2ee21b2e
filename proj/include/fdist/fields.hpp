#pragma once

#include <array>
#include <iosfwd>
#include <vector>

#include "fdist/analytic.hpp"
#include "fdist/geometry.hpp"

namespace fdist {

/// Complex nodal values of a piecewise-affine map on a mesh.
class MappingField {
public:
    MappingField() = default;
    /// Throws ConfigError on length mismatch or non-finite values.
    MappingField(MeshPtr mesh, std::vector<Complex> values);

    const Mesh& mesh() const { return *mesh_; }
    const MeshPtr& mesh_ptr() const { return mesh_; }
    const std::vector<Complex>& values() const { return values_; }
    std::vector<Complex>& mutable_values() { return values_; }

private:
    MeshPtr mesh_;
    std::vector<Complex> values_;
};

/// Per-triangle Wirtinger coefficients of the P1 basis: on triangle t,
/// f_z = sum_k dz[k] f_k and f_zbar = sum_k dzbar[k] f_k.
struct TriangleFrame {
    std::array<Complex, 3> dz;
    std::array<Complex, 3> dzbar;
};

TriangleFrame triangle_frame(Complex z0, Complex z1, Complex z2);
std::vector<TriangleFrame> triangle_frames(const Mesh& mesh);

/// Per-triangle differential quantities of a P1 map. Distortions are +inf on
/// triangles with J <= 0; the Beltrami coefficient is flagged undefined where
/// f_z = 0.
struct DerivedField {
    MeshPtr mesh;
    std::vector<Complex> fz;
    std::vector<Complex> fzbar;
    std::vector<double> jacobian;
    std::vector<double> hs_distortion;   // 2(|fz|^2 + |fzbar|^2) / J
    std::vector<double> op_distortion;   // (|fz| + |fzbar|)^2 / J
    std::vector<Complex> beltrami;
    std::vector<char> beltrami_defined;
    std::vector<Complex> image_centroid; // f at the triangle centroid

    std::size_t size() const { return fz.size(); }
    const std::vector<double>& areas() const { return mesh->areas; }
    double hs_norm(std::size_t t) const;  // Hilbert-Schmidt norm of Df
    double op_norm(std::size_t t) const;  // |fz| + |fzbar|
};

DerivedField wirtinger_derivatives(const MappingField& mapping);

struct FiniteDistortionReport {
    std::size_t nonpositive_count = 0;
    double nonpositive_area = 0.0;
    double ess_sup_op_distortion = 0.0;  // max K over J > 0
    double mean_hs_distortion = 0.0;     // area-weighted over J > 0
    double mean_jacobian = 0.0;          // area-weighted over the whole mesh
    bool finite_distortion = true;       // nonpositive_area == 0
};

FiniteDistortionReport finite_distortion_report(const DerivedField& derived);

MappingField sample_analytic(MeshPtr mesh, const AnalyticMap& map);

/// One row per triangle: tri_id, re_fz, im_fz, re_fzbar, im_fzbar, J, K_hs,
/// K_op, re_mu, im_mu, area. Undefined mu and infinite distortion print as
/// "nan" / "inf".
void write_derived_csv(std::ostream& out, const DerivedField& derived);

nlohmann::json mapping_to_json(const MappingField& mapping);
MappingField mapping_from_json(MeshPtr mesh, const nlohmann::json& doc);

} // namespace fdist
