#pragma once

#include "prc/common.hpp"
#include "prc/mesh.hpp"

#include <array>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace prc {

enum class Family { BR_velocity, P0_pressure, P2_velocity, P1disc_pressure, BDM1 };

std::string to_string(Family f);
Family family_from_string(const std::string& s);
bool is_vector_family(Family f);

using VectorField = std::function<Vec2(const Vec2&)>;
using ScalarField = std::function<double(const Vec2&)>;
using Barycentric = std::array<double, 3>;

/// Affine map from the reference triangle onto triangle t.
struct ElementGeometry {
    Vec2 origin;
    Mat2 jacobian;
    Mat2 inverse;
    double det = 0.0;
    std::array<Vec2, 3> grad_lambda;

    static ElementGeometry of(const Triangulation& mesh, int t);
    Vec2 map(const Barycentric& b) const { return origin + jacobian * Vec2(b[1], b[2]); }
    double area() const { return 0.5 * det; }
};

inline constexpr int kMaxLocalDofs = 12;

/// Local basis at one point, already multiplied by the element's dof factors
/// so that a global function restricted to the element is sum_k c[dof_k] * basis_k.
/// grad(i, j) = d v_i / d x_j. Scalar families fill `scalar` only.
struct BasisValues {
    int n = 0;
    std::array<Vec2, kMaxLocalDofs> value;
    std::array<Mat2, kMaxLocalDofs> grad;
    std::array<double, kMaxLocalDofs> div;
    std::array<double, kMaxLocalDofs> scalar;
};

/// A finite-element family bound to a mesh with its global dof map.
///
/// Dof ordering: vertices, then edges, then elements; for vector Lagrange-type
/// families all x-components precede all y-components.
///  - BR_velocity: [x at vertices | y at vertices | one normal bubble per edge]
///  - P2_velocity: [x at vertices, x at edges | y at vertices, y at edges]
///  - BDM1: two normal moments per edge (mean, linear)
///  - P0_pressure: one per triangle; P1disc_pressure: three per triangle
class FESpace {
public:
    FESpace(MeshPtr mesh, Family family);

    Family family() const { return family_; }
    const Triangulation& mesh() const { return *mesh_; }
    const MeshPtr& mesh_ptr() const { return mesh_; }
    int num_dofs() const { return ndofs_; }
    int local_size() const { return nloc_; }

    std::span<const int> element_dofs(int t) const
    {
        return {dofs_.data() + static_cast<std::size_t>(t) * nloc_, static_cast<std::size_t>(nloc_)};
    }
    std::span<const double> element_factors(int t) const
    {
        return {factors_.data() + static_cast<std::size_t>(t) * nloc_, static_cast<std::size_t>(nloc_)};
    }
    const std::vector<int>& boundary_dofs() const { return boundary_dofs_; }
    bool is_boundary_dof(int d) const { return is_boundary_[d] != 0; }

    void eval(const ElementGeometry& geo, int t, const Barycentric& b, BasisValues& out) const;
    void eval(int t, const Barycentric& b, BasisValues& out) const;

private:
    MeshPtr mesh_;
    Family family_;
    int ndofs_ = 0;
    int nloc_ = 0;
    std::vector<int> dofs_;
    std::vector<double> factors_;
    std::vector<int> boundary_dofs_;
    std::vector<std::uint8_t> is_boundary_;
};

using SpacePtr = std::shared_ptr<const FESpace>;

SpacePtr build_space(MeshPtr mesh, Family family);

/// Reference BDM1 basis (dual to the mean and linear normal moments on each
/// reference edge), value and constant reference gradient at (x, y).
void reference_bdm1(const Vec2& xi, std::array<Vec2, 6>& value, std::array<Mat2, 6>& grad);

/// Nodal values (Lagrange families), cell moments (P0, P1disc), edge normal
/// moments (BDM1). BR bubble coefficients are mean normal fluxes minus the
/// contribution of the piecewise-linear part.
Vector interpolate(const FESpace& space, const VectorField& field, int degree = 12);
Vector interpolate(const FESpace& space, const ScalarField& field, int degree = 12);

struct PointValue {
    Vec2 value = Vec2::Zero();
    Mat2 grad = Mat2::Zero();
    double div = 0.0;
    double scalar = 0.0;
};

PointValue evaluate(const FESpace& space, const Vector& coeffs, int t, const Barycentric& b);

/// Coefficients bound to their space.
struct CoeffVector {
    SpacePtr space;
    Vector values;
};

/// Text format: header `family n dofs`, then one value per line (17 digits).
void write_coeffs(std::ostream& os, const FESpace& space, const Vector& values);
Vector read_coeffs(std::istream& is, const FESpace& space);

}  // namespace prc
