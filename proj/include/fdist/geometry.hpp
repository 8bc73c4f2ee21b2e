#pragma once

#include <array>
#include <memory>
#include <vector>

#include "json.hpp"

#include "fdist/common.hpp"

namespace fdist {

enum class DomainKind { Disk, Rectangle };

/// Triangulated planar domain. Immutable after construction; share it through
/// MeshPtr between fields and sequences.
struct Mesh {
    DomainKind domain = DomainKind::Disk;
    Complex corner_lo{};  // rectangles only
    Complex corner_hi{};
    std::vector<Complex> nodes;
    std::vector<std::array<int, 3>> triangles;
    std::vector<int> boundary_nodes;  // sorted
    std::vector<char> is_boundary;    // per node
    std::vector<double> areas;        // per triangle, positive
    int refinement_level = 0;

    std::size_t node_count() const { return nodes.size(); }
    std::size_t triangle_count() const { return triangles.size(); }
    double total_area() const;
    Complex centroid(std::size_t t) const;
    /// Longest edge over all triangles.
    double max_edge_length() const;
    /// Mask of triangles with no boundary vertex.
    std::vector<char> interior_triangles() const;
};

using MeshPtr = std::shared_ptr<const Mesh>;

double signed_area(Complex a, Complex b, Complex c);

inline constexpr int kMaxDiskLevel = 10;

/// Hexagon fan around the origin, quadrisected `level` times. New midpoints on
/// boundary edges are pushed radially onto the unit circle.
Mesh build_disk_mesh(int level);

/// nx*ny cells, each split along its lower-left to upper-right diagonal.
Mesh build_rect_mesh(int nx, int ny, Complex corner_lo, Complex corner_hi);

/// Unit square at the given level: (base * 2^level) cells per side.
Mesh build_square_mesh(int level, int base = 16);

/// One quadrisection step. Disk meshes project boundary midpoints to |z| = 1.
Mesh refine(const Mesh& mesh);

nlohmann::json mesh_to_json(const Mesh& mesh);
Mesh mesh_from_json(const nlohmann::json& doc);

} // namespace fdist
