#pragma once

#include "prc/common.hpp"
#include "prc/fe_space.hpp"
#include "prc/mesh.hpp"

#include <array>
#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

namespace prc {

/// Hsieh-Clough-Tocher space: C1 piecewise cubics on the barycentric split of
/// every triangle of a (non-split) macro mesh.
///
/// On a barycentrically refined mesh the divergence-free subspace of the
/// continuous P2 velocities is exactly curl of this space, so the
/// Scott-Vogelius velocity of a problem posed on divergence-free functions
/// can be computed from a stream function without pressure unknowns.
///
/// Dofs: [psi, d_x psi, d_y psi] per vertex (3v .. 3v+2), then the normal
/// derivative along the global edge normal at each edge midpoint (3 nv + e).
/// Sub-triangle k of a macro triangle is (v_{k+1}, v_{k+2}, barycenter).
class CloughTocherSpace {
public:
    explicit CloughTocherSpace(MeshPtr mesh);

    const Triangulation& mesh() const { return *mesh_; }
    const MeshPtr& mesh_ptr() const { return mesh_; }
    int num_dofs() const { return ndofs_; }
    std::array<int, 12> element_dofs(int t) const;
    const std::vector<int>& boundary_dofs() const { return boundary_dofs_; }
    bool is_boundary_dof(int d) const { return is_boundary_[d] != 0; }

    struct Values {
        std::array<double, 12> value;
        std::array<Vec2, 12> grad;
        std::array<Mat2, 12> hess;
    };

    /// Sub-triangle of macro triangle t containing the point with macro
    /// barycentric coordinates b (the one opposite the smallest coordinate).
    static int sub_triangle_of(const Barycentric& b);
    std::array<Vec2, 3> sub_triangle(int t, int k) const;

    /// Basis functions of macro triangle t at physical point x of sub-triangle k.
    void eval(int t, int k, const Vec2& x, Values& out) const;

private:
    using Coefficients = Eigen::Matrix<double, 30, 12>;

    MeshPtr mesh_;
    int ndofs_ = 0;
    std::vector<Coefficients, Eigen::aligned_allocator<Coefficients>> coeffs_;
    std::vector<Vec2> centers_;
    std::vector<double> scales_;
    std::vector<int> boundary_dofs_;
    std::vector<std::uint8_t> is_boundary_;
};

using StreamSpacePtr = std::shared_ptr<const CloughTocherSpace>;

struct StreamValue {
    double psi = 0.0;
    Vec2 grad = Vec2::Zero();
    Mat2 hess = Mat2::Zero();

    /// curl psi = (d_y psi, -d_x psi) and its gradient.
    Vec2 velocity() const { return {grad.y(), -grad.x()}; }
    Mat2 velocity_gradient() const
    {
        Mat2 g;
        g << hess(1, 0), hess(1, 1), -hess(0, 0), -hess(0, 1);
        return g;
    }
};

StreamValue evaluate(const CloughTocherSpace& space, const Vector& coeffs, int t, const Barycentric& b);

/// Interpolant from point values and gradients of psi.
Vector interpolate(const CloughTocherSpace& space, const ScalarField& psi, const VectorField& grad_psi);

/// Element-loop helper: kernel(t, k, x, weight) for every quadrature point of
/// every sub-triangle, with weights already scaled by the sub-triangle area.
void for_each_sub_quadrature_point(const CloughTocherSpace& space, int t, int degree,
                                   const std::function<void(int, const Vec2&, double)>& kernel);

/// Same text format as write_coeffs with family tag `HCT`.
void write_coeffs(std::ostream& os, const CloughTocherSpace& space, const Vector& values);
Vector read_coeffs(std::istream& is, const CloughTocherSpace& space);

}  // namespace prc
