#include "prc/mesh.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace prc {

std::string to_string(Region r)
{
    switch (r) {
    case Region::Whole: return "Whole";
    case Region::C: return "C";
    case Region::F: return "F";
    case Region::O: return "O";
    }
    return "?";
}

Region region_from_string(const std::string& s)
{
    if (s == "Whole") return Region::Whole;
    if (s == "C") return Region::C;
    if (s == "F") return Region::F;
    if (s == "O") return Region::O;
    throw Error("unknown region tag '" + s + "'");
}

Region strip_region(double x_centroid)
{
    if (x_centroid < 0.4) return Region::C;
    if (x_centroid < 0.6) return Region::F;
    return Region::O;
}

Triangulation::Triangulation(std::vector<Vec2> vertices, std::vector<std::array<int, 3>> triangles,
                             std::vector<Region> regions, int cells_per_side, bool barycentric)
    : vertices_(std::move(vertices)),
      triangles_(std::move(triangles)),
      regions_(std::move(regions)),
      cells_per_side_(cells_per_side),
      barycentric_(barycentric)
{
    PRC_REQUIRE(regions_.size() == triangles_.size(), "Triangulation: one region tag per triangle required");
    for (const auto& tri : triangles_)
        for (int v : tri)
            PRC_REQUIRE(v >= 0 && v < num_vertices(), "Triangulation: vertex index out of range");
    build_topology();
}

void Triangulation::build_topology()
{
    const int nt = num_triangles();
    const auto nv = static_cast<std::int64_t>(num_vertices());
    std::unordered_map<std::int64_t, int> lookup;
    lookup.reserve(static_cast<std::size_t>(3 * nt));
    tri_edges_.assign(nt, {-1, -1, -1});
    tri_edge_signs_.assign(nt, {0, 0, 0});
    edges_.clear();
    edge_tris_.clear();

    for (int t = 0; t < nt; ++t) {
        const auto& tri = triangles_[t];
        for (int k = 0; k < 3; ++k) {
            const int a = tri[(k + 1) % 3];
            const int b = tri[(k + 2) % 3];
            const int lo = std::min(a, b);
            const int hi = std::max(a, b);
            const std::int64_t key = lo * nv + hi;
            auto [it, inserted] = lookup.try_emplace(key, static_cast<int>(edges_.size()));
            if (inserted) {
                edges_.push_back({lo, hi});
                edge_tris_.push_back({t, -1});
            } else {
                auto& adj = edge_tris_[it->second];
                PRC_REQUIRE(adj[1] == -1, "Triangulation: edge shared by more than two triangles");
                adj[1] = t;
            }
            tri_edges_[t][k] = it->second;
            tri_edge_signs_[t][k] = a < b ? 1 : -1;
        }
    }

    boundary_edge_.assign(edges_.size(), 0);
    boundary_vertex_.assign(vertices_.size(), 0);
    for (std::size_t e = 0; e < edges_.size(); ++e) {
        if (edge_tris_[e][1] == -1) {
            boundary_edge_[e] = 1;
            boundary_vertex_[edges_[e][0]] = 1;
            boundary_vertex_[edges_[e][1]] = 1;
        }
    }
}

double Triangulation::area(int t) const
{
    const auto& tri = triangles_[t];
    const Vec2 a = vertices_[tri[1]] - vertices_[tri[0]];
    const Vec2 b = vertices_[tri[2]] - vertices_[tri[0]];
    return 0.5 * (a.x() * b.y() - a.y() * b.x());
}

Vec2 Triangulation::centroid(int t) const
{
    const auto& tri = triangles_[t];
    return (vertices_[tri[0]] + vertices_[tri[1]] + vertices_[tri[2]]) / 3.0;
}

double Triangulation::edge_length(int e) const
{
    return (vertices_[edges_[e][1]] - vertices_[edges_[e][0]]).norm();
}

Vec2 Triangulation::edge_normal(int e) const
{
    const Vec2 t = vertices_[edges_[e][1]] - vertices_[edges_[e][0]];
    return Vec2(t.y(), -t.x()) / t.norm();
}

double Triangulation::max_edge_length() const
{
    double h = 0.0;
    for (int e = 0; e < num_edges(); ++e) h = std::max(h, edge_length(e));
    return h;
}

double Triangulation::total_area() const
{
    double sum = 0.0;
    for (int t = 0; t < num_triangles(); ++t) sum += area(t);
    return sum;
}

Triangulation build_unit_square(int n, RegionTagging tagging)
{
    PRC_REQUIRE(n >= 1, "build_unit_square: need at least one cell per side");
    if (tagging == RegionTagging::ThreeStrips)
        PRC_REQUIRE(n % 5 == 0, "build_unit_square: three-strip tagging needs n divisible by 5 (got n = " +
                                    std::to_string(n) + ")");

    std::vector<Vec2> vertices;
    vertices.reserve(static_cast<std::size_t>((n + 1) * (n + 1)));
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i)
            vertices.emplace_back(static_cast<double>(i) / n, static_cast<double>(j) / n);

    auto id = [n](int i, int j) { return j * (n + 1) + i; };
    std::vector<std::array<int, 3>> triangles;
    triangles.reserve(static_cast<std::size_t>(2 * n * n));
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    }

    std::vector<Region> regions(triangles.size(), Region::Whole);
    if (tagging == RegionTagging::ThreeStrips) {
        for (std::size_t t = 0; t < triangles.size(); ++t) {
            const auto& tri = triangles[t];
            const double xc = (vertices[tri[0]].x() + vertices[tri[1]].x() + vertices[tri[2]].x()) / 3.0;
            regions[t] = strip_region(xc);
        }
    }
    return Triangulation(std::move(vertices), std::move(triangles), std::move(regions), n, false);
}

Triangulation refine_uniform(const Triangulation& mesh)
{
    const int nv = mesh.num_vertices();
    std::vector<Vec2> vertices = mesh.vertices();
    vertices.reserve(static_cast<std::size_t>(nv + mesh.num_edges()));
    for (int e = 0; e < mesh.num_edges(); ++e) {
        const auto& ed = mesh.edge(e);
        vertices.push_back(0.5 * (mesh.vertex(ed[0]) + mesh.vertex(ed[1])));
    }

    std::vector<std::array<int, 3>> triangles;
    std::vector<Region> regions;
    triangles.reserve(static_cast<std::size_t>(4 * mesh.num_triangles()));
    regions.reserve(triangles.capacity());
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& v = mesh.triangle(t);
        const auto& e = mesh.triangle_edges(t);
        // m[k] is the midpoint of the edge opposite vertex k.
        const int m0 = nv + e[0], m1 = nv + e[1], m2 = nv + e[2];
        triangles.push_back({v[0], m2, m1});
        triangles.push_back({m2, v[1], m0});
        triangles.push_back({m1, m0, v[2]});
        triangles.push_back({m0, m1, m2});
        for (int c = 0; c < 4; ++c) regions.push_back(mesh.region(t));
    }
    return Triangulation(std::move(vertices), std::move(triangles), std::move(regions), 2 * mesh.cells_per_side(),
                         false);
}

Triangulation refine_barycentric(const Triangulation& mesh)
{
    const int nv = mesh.num_vertices();
    std::vector<Vec2> vertices = mesh.vertices();
    vertices.reserve(static_cast<std::size_t>(nv + mesh.num_triangles()));
    for (int t = 0; t < mesh.num_triangles(); ++t) vertices.push_back(mesh.centroid(t));

    std::vector<std::array<int, 3>> triangles;
    std::vector<Region> regions;
    triangles.reserve(static_cast<std::size_t>(3 * mesh.num_triangles()));
    regions.reserve(triangles.capacity());
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& v = mesh.triangle(t);
        const int g = nv + t;
        triangles.push_back({v[0], v[1], g});
        triangles.push_back({v[1], v[2], g});
        triangles.push_back({v[2], v[0], g});
        for (int c = 0; c < 3; ++c) regions.push_back(mesh.region(t));
    }
    return Triangulation(std::move(vertices), std::move(triangles), std::move(regions), mesh.cells_per_side(), true);
}

void validate(const Triangulation& mesh)
{
    for (int t = 0; t < mesh.num_triangles(); ++t)
        PRC_REQUIRE(mesh.area(t) > 0.0, "validate: triangle " + std::to_string(t) + " is not counterclockwise");

    for (int e = 0; e < mesh.num_edges(); ++e) {
        const auto& adj = mesh.edge_triangles(e);
        PRC_REQUIRE(adj[0] >= 0, "validate: orphan edge");
        if (adj[1] < 0) {
            const Vec2 mid = 0.5 * (mesh.vertex(mesh.edge(e)[0]) + mesh.vertex(mesh.edge(e)[1]));
            const bool on_square = std::abs(mid.x()) < 1e-14 || std::abs(mid.x() - 1.0) < 1e-14 ||
                                   std::abs(mid.y()) < 1e-14 || std::abs(mid.y() - 1.0) < 1e-14;
            PRC_REQUIRE(on_square, "validate: boundary edge " + std::to_string(e) + " is not on the square boundary");
            continue;
        }
        int signs[2] = {0, 0};
        for (int s = 0; s < 2; ++s) {
            const int t = adj[s];
            for (int k = 0; k < 3; ++k)
                if (mesh.triangle_edges(t)[k] == e) signs[s] = mesh.triangle_edge_signs(t)[k];
        }
        PRC_REQUIRE(signs[0] * signs[1] == -1, "validate: interior edge " + std::to_string(e) +
                                                  " has inconsistent incidence signs");
    }

    for (int t = 0; t < mesh.num_triangles(); ++t) {
        for (int k = 0; k < 3; ++k) {
            // outward normal of a CCW triangle is the right-hand normal of v[k+1] -> v[k+2]
            const auto& tri = mesh.triangle(t);
            const Vec2 d = mesh.vertex(tri[(k + 2) % 3]) - mesh.vertex(tri[(k + 1) % 3]);
            const Vec2 outward(d.y(), -d.x());
            const double dot = outward.dot(mesh.edge_normal(mesh.triangle_edges(t)[k]));
            PRC_REQUIRE(dot * mesh.triangle_edge_signs(t)[k] > 0.0, "validate: incidence sign mismatch");
        }
    }

    const int euler = mesh.num_vertices() - mesh.num_edges() + mesh.num_triangles();
    PRC_REQUIRE(euler == 1, "validate: Euler characteristic " + std::to_string(euler) + " != 1");
    PRC_REQUIRE(std::abs(mesh.total_area() - 1.0) < 1e-12, "validate: total area differs from 1");
}

void write_mesh(std::ostream& os, const Triangulation& mesh)
{
    os << mesh.num_vertices() << ' ' << mesh.num_triangles() << ' ' << mesh.num_edges() << '\n';
    os << std::setprecision(17);
    for (const auto& v : mesh.vertices()) os << v.x() << ' ' << v.y() << '\n';
    for (const auto& t : mesh.triangles()) os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    for (Region r : mesh.regions()) os << to_string(r) << '\n';
}

Triangulation read_mesh(std::istream& is)
{
    int nv = 0, nt = 0, ne = 0;
    PRC_REQUIRE(static_cast<bool>(is >> nv >> nt >> ne), "read_mesh: malformed header");
    std::vector<Vec2> vertices(static_cast<std::size_t>(nv));
    for (auto& v : vertices) PRC_REQUIRE(static_cast<bool>(is >> v.x() >> v.y()), "read_mesh: truncated vertices");
    std::vector<std::array<int, 3>> triangles(static_cast<std::size_t>(nt));
    for (auto& t : triangles)
        PRC_REQUIRE(static_cast<bool>(is >> t[0] >> t[1] >> t[2]), "read_mesh: truncated triangles");
    std::vector<Region> regions(static_cast<std::size_t>(nt));
    for (auto& r : regions) {
        std::string tag;
        PRC_REQUIRE(static_cast<bool>(is >> tag), "read_mesh: truncated region tags");
        r = region_from_string(tag);
    }
    // The dump does not carry the structured metadata; recover it from the
    // boundary vertex spacing.
    double min_x = 1.0;
    for (const auto& v : vertices)
        if (std::abs(v.y()) < 1e-14 && v.x() > 1e-14) min_x = std::min(min_x, v.x());
    Triangulation mesh(std::move(vertices), std::move(triangles), std::move(regions),
                       static_cast<int>(std::lround(1.0 / min_x)), false);
    PRC_REQUIRE(mesh.num_edges() == ne, "read_mesh: edge count mismatch");
    return mesh;
}

PointLocator::PointLocator(MeshPtr mesh) : mesh_(std::move(mesh))
{
    PRC_REQUIRE(mesh_ != nullptr, "PointLocator: null mesh");
    const int nt = mesh_->num_triangles();
    buckets_ = std::max(1, static_cast<int>(std::ceil(std::sqrt(nt / 2.0))));
    const int nb = buckets_ * buckets_;
    const double tol = 1e-12;

    auto range = [this, tol](double lo, double hi) {
        int a = static_cast<int>(std::floor((lo - tol) * buckets_));
        int b = static_cast<int>(std::floor((hi + tol) * buckets_));
        return std::pair{std::clamp(a, 0, buckets_ - 1), std::clamp(b, 0, buckets_ - 1)};
    };

    std::vector<int> counts(static_cast<std::size_t>(nb) + 1, 0);
    auto visit = [&](auto&& fn) {
        for (int t = 0; t < nt; ++t) {
            const auto& tri = mesh_->triangle(t);
            double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
            for (int v : tri) {
                x0 = std::min(x0, mesh_->vertex(v).x());
                x1 = std::max(x1, mesh_->vertex(v).x());
                y0 = std::min(y0, mesh_->vertex(v).y());
                y1 = std::max(y1, mesh_->vertex(v).y());
            }
            const auto [ia, ib] = range(x0, x1);
            const auto [ja, jb] = range(y0, y1);
            for (int j = ja; j <= jb; ++j)
                for (int i = ia; i <= ib; ++i) fn(j * buckets_ + i, t);
        }
    };
    visit([&](int b, int) { ++counts[static_cast<std::size_t>(b) + 1]; });
    for (int b = 0; b < nb; ++b) counts[b + 1] += counts[b];
    bucket_start_ = counts;
    bucket_items_.assign(static_cast<std::size_t>(counts[nb]), -1);
    std::vector<int> fill(counts.begin(), counts.end() - 1);
    visit([&](int b, int t) { bucket_items_[fill[b]++] = t; });
}

std::array<double, 3> PointLocator::barycentric(int t, const Vec2& p) const
{
    const auto& tri = mesh_->triangle(t);
    const Vec2& a = mesh_->vertex(tri[0]);
    Mat2 J;
    J.col(0) = mesh_->vertex(tri[1]) - a;
    J.col(1) = mesh_->vertex(tri[2]) - a;
    const Vec2 xi = J.inverse() * (p - a);
    return {1.0 - xi.x() - xi.y(), xi.x(), xi.y()};
}

PointLocation PointLocator::locate(const Vec2& p) const
{
    const double tol = 1e-12;
    if (!(p.x() >= -tol && p.x() <= 1.0 + tol && p.y() >= -tol && p.y() <= 1.0 + tol)) {
        std::ostringstream msg;
        msg << "locate_point: (" << p.x() << ", " << p.y() << ") is outside the unit square";
        throw Error(msg.str());
    }
    const int i = std::clamp(static_cast<int>(std::floor(p.x() * buckets_)), 0, buckets_ - 1);
    const int j = std::clamp(static_cast<int>(std::floor(p.y() * buckets_)), 0, buckets_ - 1);
    const int b = j * buckets_ + i;
    for (int k = bucket_start_[b]; k < bucket_start_[b + 1]; ++k) {
        const int t = bucket_items_[k];
        auto bary = barycentric(t, p);
        if (bary[0] >= -tol && bary[1] >= -tol && bary[2] >= -tol) {
            double sum = 0.0;
            for (double& l : bary) {
                l = std::clamp(l, 0.0, 1.0);
                sum += l;
            }
            for (double& l : bary) l /= sum;
            return {t, bary};
        }
    }
    throw Error("locate_point: no triangle contains the point");
}

}  // namespace prc
