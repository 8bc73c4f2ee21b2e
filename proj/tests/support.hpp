#pragma once

#include <random>

#include "fdist/fields.hpp"
#include "fdist/geometry.hpp"

namespace fdist::test {

inline MeshPtr disk(int level) { return std::make_shared<const Mesh>(build_disk_mesh(level)); }

inline MeshPtr square(int nx, int ny = -1)
{
    return std::make_shared<const Mesh>(build_rect_mesh(nx, ny < 0 ? nx : ny, {0.0, 0.0}, {1.0, 1.0}));
}

inline MappingField affine(MeshPtr mesh, Complex a, Complex b) { return sample_analytic(mesh, make_affine(a, b)); }

/// Identity plus a smooth random interior bump and nodal noise; retried until
/// every triangle has J > min_j.
inline MappingField random_feasible(MeshPtr mesh, std::mt19937_64& rng, double amplitude = 0.1, double min_j = 0.1)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (;;) {
        const Complex c1(u(rng), u(rng)), c2(u(rng), u(rng)), c3(u(rng), u(rng));
        std::vector<Complex> values(mesh->node_count());
        for (std::size_t v = 0; v < values.size(); ++v) {
            const Complex z = mesh->nodes[v];
            Complex w = z;
            if (!mesh->is_boundary[v])
                w += amplitude * (c1 * z * z + c2 * std::conj(z) * z + c3 * std::conj(z)) +
                     0.02 * amplitude * Complex(u(rng), u(rng));
            values[v] = w;
        }
        MappingField f(mesh, std::move(values));
        const DerivedField d = wirtinger_derivatives(f);
        if (*std::min_element(d.jacobian.begin(), d.jacobian.end()) > min_j) return f;
    }
}

} // namespace fdist::test
