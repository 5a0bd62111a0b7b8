#pragma once

#include "prc/common.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace prc {

/// Subdomain marker of a triangle. Whole is used for meshes without a
/// control/observation split; C, F and O are the strips x < 2/5,
/// 2/5 < x < 3/5 and x > 3/5.
enum class Region : std::uint8_t { Whole, C, F, O };

std::string to_string(Region r);
Region region_from_string(const std::string& s);

enum class RegionTagging { None, ThreeStrips };

/// Conforming triangulation of the unit square.
///
/// Triangles are counterclockwise. Local edge k of a triangle is the edge
/// opposite local vertex k, i.e. it runs from vertex k+1 to vertex k+2 (mod 3).
/// Global edges store their endpoints in ascending index order; the global
/// edge normal is the right-hand normal of that direction. The incidence
/// sign of a triangle/edge pair is +1 when the global normal points out of
/// the triangle.
class Triangulation {
public:
    Triangulation(std::vector<Vec2> vertices, std::vector<std::array<int, 3>> triangles,
                  std::vector<Region> regions, int cells_per_side, bool barycentric);

    int num_vertices() const { return static_cast<int>(vertices_.size()); }
    int num_triangles() const { return static_cast<int>(triangles_.size()); }
    int num_edges() const { return static_cast<int>(edges_.size()); }

    const Vec2& vertex(int v) const { return vertices_[v]; }
    const std::array<int, 3>& triangle(int t) const { return triangles_[t]; }
    const std::array<int, 2>& edge(int e) const { return edges_[e]; }
    const std::array<int, 3>& triangle_edges(int t) const { return tri_edges_[t]; }
    const std::array<int, 3>& triangle_edge_signs(int t) const { return tri_edge_signs_[t]; }
    /// Adjacent triangles of an edge; second entry is -1 on the boundary.
    const std::array<int, 2>& edge_triangles(int e) const { return edge_tris_[e]; }
    bool is_boundary_edge(int e) const { return boundary_edge_[e] != 0; }
    bool is_boundary_vertex(int v) const { return boundary_vertex_[v] != 0; }
    Region region(int t) const { return regions_[t]; }

    const std::vector<Vec2>& vertices() const { return vertices_; }
    const std::vector<std::array<int, 3>>& triangles() const { return triangles_; }
    const std::vector<Region>& regions() const { return regions_; }

    /// Number of structured cells per side of the square this mesh represents
    /// (doubles under uniform refinement, unchanged by the barycentric split).
    int cells_per_side() const { return cells_per_side_; }
    bool barycentric() const { return barycentric_; }

    double area(int t) const;
    Vec2 centroid(int t) const;
    double edge_length(int e) const;
    /// Unit global normal of edge e.
    Vec2 edge_normal(int e) const;
    double max_edge_length() const;
    double total_area() const;

    /// True when triangle t contributes to integrals restricted to `r`.
    bool in_region(int t, Region r) const { return r == Region::Whole || regions_[t] == r; }

private:
    void build_topology();

    std::vector<Vec2> vertices_;
    std::vector<std::array<int, 3>> triangles_;
    std::vector<Region> regions_;
    std::vector<std::array<int, 2>> edges_;
    std::vector<std::array<int, 3>> tri_edges_;
    std::vector<std::array<int, 3>> tri_edge_signs_;
    std::vector<std::array<int, 2>> edge_tris_;
    std::vector<std::uint8_t> boundary_edge_;
    std::vector<std::uint8_t> boundary_vertex_;
    int cells_per_side_ = 0;
    bool barycentric_ = false;
};

using MeshPtr = std::shared_ptr<const Triangulation>;

/// Structured n x n mesh of the unit square; every square cell is split along
/// its lower-left to upper-right diagonal.
Triangulation build_unit_square(int n, RegionTagging tagging = RegionTagging::None);

/// Red refinement: every triangle is split into four congruent children.
Triangulation refine_uniform(const Triangulation& mesh);

/// Barycentric (Alfeld) split: every triangle is split into three children
/// sharing its barycenter.
Triangulation refine_barycentric(const Triangulation& mesh);

/// Region of a triangle with the given centroid under the three-strip split.
Region strip_region(double x_centroid);

/// Checks the structural invariants (orientation, edge sharing, incidence
/// signs, Euler characteristic, area). Throws Error on violation.
void validate(const Triangulation& mesh);

/// Plain-text dump: header `nv nt ne`, vertex lines, triangle lines, region lines.
void write_mesh(std::ostream& os, const Triangulation& mesh);
Triangulation read_mesh(std::istream& is);

struct PointLocation {
    int triangle = -1;
    std::array<double, 3> bary{};
};

/// Bucketed point location. On shared edges and vertices the lowest
/// containing triangle index is returned.
class PointLocator {
public:
    explicit PointLocator(MeshPtr mesh);

    PointLocation locate(const Vec2& p) const;
    const Triangulation& mesh() const { return *mesh_; }

private:
    std::array<double, 3> barycentric(int t, const Vec2& p) const;

    MeshPtr mesh_;
    int buckets_ = 1;
    std::vector<int> bucket_start_;
    std::vector<int> bucket_items_;
};

}  // namespace prc
