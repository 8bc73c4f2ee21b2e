#include "fdist/geometry.hpp"

#include <cmath>
#include <map>
#include <utility>

#include <fmt/format.h>

namespace fdist {

namespace {

void finalize(Mesh& mesh)
{
    mesh.areas.resize(mesh.triangles.size());
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        const double a = signed_area(mesh.nodes[tri[0]], mesh.nodes[tri[1]], mesh.nodes[tri[2]]);
        if (!(a > 0.0))
            throw InternalError(fmt::format("triangle {} is not positively oriented (area {})", t, a));
        mesh.areas[t] = a;
    }
    mesh.boundary_nodes.clear();
    for (std::size_t v = 0; v < mesh.nodes.size(); ++v)
        if (mesh.is_boundary[v]) mesh.boundary_nodes.push_back(static_cast<int>(v));
}

// Edges used by exactly one triangle.
std::map<std::pair<int, int>, int> edge_use_counts(const Mesh& mesh)
{
    std::map<std::pair<int, int>, int> counts;
    for (const auto& tri : mesh.triangles)
        for (int k = 0; k < 3; ++k) {
            const int a = tri[k], b = tri[(k + 1) % 3];
            ++counts[{std::min(a, b), std::max(a, b)}];
        }
    return counts;
}

} // namespace

double signed_area(Complex a, Complex b, Complex c)
{
    const Complex e1 = b - a, e2 = c - a;
    return 0.5 * (e1.real() * e2.imag() - e1.imag() * e2.real());
}

double Mesh::total_area() const { return pairwise_sum(areas); }

Complex Mesh::centroid(std::size_t t) const
{
    const auto& tri = triangles[t];
    return (nodes[tri[0]] + nodes[tri[1]] + nodes[tri[2]]) / 3.0;
}

double Mesh::max_edge_length() const
{
    double h = 0.0;
    for (const auto& tri : triangles)
        for (int k = 0; k < 3; ++k)
            h = std::max(h, std::abs(nodes[tri[k]] - nodes[tri[(k + 1) % 3]]));
    return h;
}

std::vector<char> Mesh::interior_triangles() const
{
    std::vector<char> mask(triangles.size(), 1);
    for (std::size_t t = 0; t < triangles.size(); ++t)
        for (int v : triangles[t])
            if (is_boundary[v]) mask[t] = 0;
    return mask;
}

Mesh refine(const Mesh& mesh)
{
    Mesh out;
    out.domain = mesh.domain;
    out.corner_lo = mesh.corner_lo;
    out.corner_hi = mesh.corner_hi;
    out.refinement_level = mesh.refinement_level + 1;
    out.nodes = mesh.nodes;
    out.is_boundary = mesh.is_boundary;
    out.triangles.reserve(4 * mesh.triangles.size());

    const auto counts = edge_use_counts(mesh);
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
        const std::pair<int, int> key{std::min(a, b), std::max(a, b)};
        if (auto it = midpoint.find(key); it != midpoint.end()) return it->second;
        Complex m = 0.5 * (mesh.nodes[a] + mesh.nodes[b]);
        const bool on_boundary = counts.at(key) == 1;
        if (on_boundary && mesh.domain == DomainKind::Disk) m /= std::abs(m);
        const int id = static_cast<int>(out.nodes.size());
        out.nodes.push_back(m);
        out.is_boundary.push_back(on_boundary ? 1 : 0);
        midpoint.emplace(key, id);
        return id;
    };

    for (const auto& tri : mesh.triangles) {
        const int a = tri[0], b = tri[1], c = tri[2];
        const int ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
        out.triangles.push_back({a, ab, ca});
        out.triangles.push_back({ab, b, bc});
        out.triangles.push_back({ca, bc, c});
        out.triangles.push_back({ab, bc, ca});
    }
    finalize(out);
    return out;
}

Mesh build_disk_mesh(int level)
{
    if (level < 0 || level > kMaxDiskLevel)
        throw ConfigError(fmt::format("disk refinement level {} outside [0, {}]", level, kMaxDiskLevel));
    Mesh mesh;
    mesh.domain = DomainKind::Disk;
    mesh.nodes.push_back({0.0, 0.0});
    mesh.is_boundary.push_back(0);
    for (int k = 0; k < 6; ++k) {
        const double angle = k * kPi / 3.0;
        mesh.nodes.push_back({std::cos(angle), std::sin(angle)});
        mesh.is_boundary.push_back(1);
    }
    for (int k = 0; k < 6; ++k) mesh.triangles.push_back({0, 1 + k, 1 + (k + 1) % 6});
    finalize(mesh);
    for (int l = 0; l < level; ++l) mesh = refine(mesh);
    return mesh;
}

Mesh build_rect_mesh(int nx, int ny, Complex corner_lo, Complex corner_hi)
{
    if (nx < 1 || ny < 1) throw ConfigError(fmt::format("rectangle mesh needs nx, ny >= 1 (got {}, {})", nx, ny));
    if (!(corner_hi.real() > corner_lo.real() && corner_hi.imag() > corner_lo.imag()))
        throw ConfigError("degenerate rectangle: corner_hi must exceed corner_lo in both coordinates");
    Mesh mesh;
    mesh.domain = DomainKind::Rectangle;
    mesh.corner_lo = corner_lo;
    mesh.corner_hi = corner_hi;
    const double dx = corner_hi.real() - corner_lo.real();
    const double dy = corner_hi.imag() - corner_lo.imag();
    mesh.nodes.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i) {
            // Pin the far edges to the exact corner coordinates.
            const double x = (i == nx) ? corner_hi.real() : corner_lo.real() + dx * i / nx;
            const double y = (j == ny) ? corner_hi.imag() : corner_lo.imag() + dy * j / ny;
            mesh.nodes.push_back({x, y});
            mesh.is_boundary.push_back((i == 0 || i == nx || j == 0 || j == ny) ? 1 : 0);
        }
    auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
    mesh.triangles.reserve(2 * static_cast<std::size_t>(nx) * ny);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            mesh.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            mesh.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    finalize(mesh);
    return mesh;
}

Mesh build_square_mesh(int level, int base)
{
    if (level < 0 || level > kMaxDiskLevel) throw ConfigError(fmt::format("square mesh level {} out of range", level));
    if (base < 1) throw ConfigError("square mesh base must be >= 1");
    const int n = base << level;
    Mesh mesh = build_rect_mesh(n, n, {0.0, 0.0}, {1.0, 1.0});
    mesh.refinement_level = level;
    return mesh;
}

nlohmann::json mesh_to_json(const Mesh& mesh)
{
    nlohmann::json doc;
    doc["domain"] = mesh.domain == DomainKind::Disk ? "disk" : "rect";
    if (mesh.domain == DomainKind::Rectangle) {
        doc["corner_lo"] = {mesh.corner_lo.real(), mesh.corner_lo.imag()};
        doc["corner_hi"] = {mesh.corner_hi.real(), mesh.corner_hi.imag()};
    }
    auto nodes = nlohmann::json::array();
    for (const auto& z : mesh.nodes) nodes.push_back({z.real(), z.imag()});
    doc["nodes"] = std::move(nodes);
    auto tris = nlohmann::json::array();
    for (const auto& t : mesh.triangles) tris.push_back({t[0], t[1], t[2]});
    doc["triangles"] = std::move(tris);
    doc["boundary"] = mesh.boundary_nodes;
    doc["level"] = mesh.refinement_level;
    return doc;
}

Mesh mesh_from_json(const nlohmann::json& doc)
{
    try {
        Mesh mesh;
        const std::string domain = doc.value("domain", "disk");
        if (domain == "disk") {
            mesh.domain = DomainKind::Disk;
        } else if (domain == "rect") {
            mesh.domain = DomainKind::Rectangle;
            mesh.corner_lo = {doc.at("corner_lo")[0].get<double>(), doc.at("corner_lo")[1].get<double>()};
            mesh.corner_hi = {doc.at("corner_hi")[0].get<double>(), doc.at("corner_hi")[1].get<double>()};
        } else {
            throw ConfigError("unknown mesh domain '" + domain + "'");
        }
        for (const auto& p : doc.at("nodes")) mesh.nodes.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        const int n = static_cast<int>(mesh.nodes.size());
        for (const auto& t : doc.at("triangles")) {
            std::array<int, 3> tri{t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<int>()};
            for (int v : tri)
                if (v < 0 || v >= n) throw ConfigError("triangle references node out of range");
            mesh.triangles.push_back(tri);
        }
        mesh.is_boundary.assign(mesh.nodes.size(), 0);
        for (const auto& b : doc.at("boundary")) {
            const int v = b.get<int>();
            if (v < 0 || v >= n) throw ConfigError("boundary index out of range");
            mesh.is_boundary[v] = 1;
        }
        mesh.refinement_level = doc.value("level", 0);
        finalize(mesh);
        return mesh;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed mesh JSON: ") + e.what());
    } catch (const InternalError& e) {
        throw ConfigError(std::string("invalid mesh JSON: ") + e.what());
    }
}

} // namespace fdist
