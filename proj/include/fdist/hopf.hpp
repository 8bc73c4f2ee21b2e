#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "fdist/fields.hpp"

namespace fdist {

/// Per-triangle coefficient of a quadratic differential in the w-chart.
struct HopfField {
    MeshPtr mesh;
    std::vector<Complex> values;
    std::vector<char> degenerate;  // J <= 0 on the triangle; value set to 0
};

/// 1 / (1 - |z|^2)^2. Throws DomainError for |z| >= 1.
double hyperbolic_weight(Complex z);

/// K^(p-1) h_w conj(h_wbar) with h the mapping behind `derived`.
HopfField hopf_differential(const DerivedField& derived, double p);

enum class HopfWeight { None, Hyperbolic };

/// S_N(pK) h_w conj(h_wbar) eta(h), S_N the degree-N partial sum of exp;
/// N = nullopt selects exp(pK). The hyperbolic weight is evaluated at the image
/// of the triangle centroid and throws DomainError outside the unit disk.
HopfField ahlfors_hopf(const DerivedField& derived, double p, std::optional<int> N, HopfWeight weight);

struct HolomorphyResidual {
    double l1 = 0.0;
    double l2 = 0.0;
    std::size_t fitted_vertices = 0;
    std::size_t skipped_vertices = 0;  // boundary vertices or stars with < 3 triangles
    double fitted_area = 0.0;          // sum of lumped vertex areas that were fitted
    std::vector<double> local;         // |c2| per vertex, NaN where skipped
};

/// Least-squares fit of c0 + c1 w + c2 conj(w) to the centroid values on each
/// interior vertex star; |c2| measures the failure of holomorphy. Global
/// residuals aggregate |c2| with lumped vertex areas (star area / 3).
HolomorphyResidual holomorphy_residual(const HopfField& field);

double l1_norm(const HopfField& field);
/// max |a - b| over triangles in `mask` (all when empty).
double sup_gap(const HopfField& a, const HopfField& b, const std::vector<char>& mask = {});

/// Columns: tri_id, re, im, area.
void write_hopf_csv(std::ostream& out, const HopfField& field);

} // namespace fdist
