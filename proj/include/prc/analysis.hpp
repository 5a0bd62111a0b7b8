#pragma once

#include "prc/assembly.hpp"
#include "prc/common.hpp"
#include "prc/kkt.hpp"
#include "prc/mesh.hpp"
#include "prc/problem.hpp"
#include "prc/stream_function.hpp"

#include <optional>
#include <string>
#include <vector>

namespace prc {

/// Reference state, adjoint and control at one point.
struct ReferenceValue {
    Vec2 u = Vec2::Zero();
    Mat2 grad_u = Mat2::Zero();
    Vec2 z = Vec2::Zero();
    Mat2 grad_z = Mat2::Zero();
    Vec2 q = Vec2::Zero();
};

class ReferenceField {
public:
    virtual ~ReferenceField() = default;
    virtual ReferenceValue at(const Vec2& x) const = 0;
};

/// Closed-form reference; missing closures evaluate to zero.
class AnalyticReference final : public ReferenceField {
public:
    AnalyticReference(VectorField u, GradientField grad_u, VectorField z = {}, GradientField grad_z = {},
                      VectorField q = {});
    ReferenceValue at(const Vec2& x) const override;

private:
    VectorField u_, z_, q_;
    GradientField grad_u_, grad_z_;
};

/// Optimal solution of Example 2 for every eps: the target flow with zero
/// adjoint and zero control. The observed perturbation is the gradient of
/// a potential vanishing on x = 3/5, so it is invisible to divergence-free
/// test functions.
AnalyticReference example2_solution(const ExampleData& data);

struct ReferenceKey {
    ExampleId example = ExampleId::Ex1;
    double nu = 1.0;
    double alpha = 1e-1;
    /// Macro mesh level of the stream-function solve.
    int n = 160;

    /// File stem, e.g. `ex1_nu1e-03_alpha1e-06_n160`.
    std::string name() const;
    bool operator==(const ReferenceKey&) const = default;
};

/// Fine-grid Scott-Vogelius reference (computed at eps = 0), stored as the
/// stream functions of velocity and adjoint. Its control is -alpha^{-1/2} z.
class ReferenceSolution final : public ReferenceField {
public:
    ReferenceSolution(ReferenceKey key, StreamSpacePtr space, Vector psi_u, Vector psi_z);

    const ReferenceKey& key() const { return key_; }
    Scheme scheme() const { return Scheme::ScottVogelius; }
    const CloughTocherSpace& space() const { return *space_; }
    const StreamSpacePtr& space_ptr() const { return space_; }
    const Vector& psi_u() const { return psi_u_; }
    const Vector& psi_z() const { return psi_z_; }

    ReferenceValue at(const Vec2& x) const override;

private:
    ReferenceKey key_;
    StreamSpacePtr space_;
    Vector psi_u_, psi_z_;
    PointLocator locator_;
};

ReferenceSolution compute_reference(const ReferenceKey& key, double tolerance = 1e-8, Exec exec = Exec::Parallel);

struct ErrorReport {
    double h = 0.0;
    int velocity_dofs = 0;
    int pressure_dofs = 0;
    /// |||(u - u_h, z - z_h)|||, root-sum-square of the two H1 seminorms.
    double energy = 0.0;
    double u_h1 = 0.0;
    double u_l2 = 0.0;
    double z_h1 = 0.0;
    double z_l2 = 0.0;
    /// L2 error of the control on the control region.
    double q_l2 = 0.0;
    std::optional<double> eoc_energy, eoc_u_l2, eoc_q;
};

/// Errors by quadrature on the mesh of `disc`; the reference is evaluated at
/// the same quadrature points.
ErrorReport compute_errors(const Discretization& disc, const SolutionFields& fields, const ReferenceField& reference,
                           Region control_region, int degree = 12, Exec exec = Exec::Parallel);

/// rate_i = log(e_i / e_{i+1}) / log(h_i / h_{i+1}); nullopt when an error
/// is not positive or h does not decrease.
std::vector<std::optional<double>> eoc(const std::vector<double>& errors, const std::vector<double>& h);
/// Same with halving mesh sizes.
std::vector<std::optional<double>> eoc(const std::vector<double>& errors);

/// Fills the eoc_* fields of consecutive levels (the first level has none).
void fill_eoc(std::vector<ErrorReport>& levels);

/// ||v_h - v||_{L2(region)} for a vector-valued space.
double l2_error(const FESpace& space, const Vector& coeffs, const VectorField& exact, Region region = Region::Whole,
                int degree = 12, Exec exec = Exec::Parallel);
/// |v_h - v|_{H1}, elementwise gradients.
double h1_error(const FESpace& space, const Vector& coeffs, const GradientField& exact, int degree = 12,
                Exec exec = Exec::Parallel);
double l2_norm(const FESpace& space, const Vector& coeffs, Region region = Region::Whole, int degree = 8,
               Exec exec = Exec::Parallel);
double h1_seminorm(const FESpace& space, const Vector& coeffs, int degree = 8, Exec exec = Exec::Parallel);
/// ||a_h - b_h||_{L2} for two vector fields on the same mesh.
double l2_distance(const FESpace& a, const Vector& ca, const FESpace& b, const Vector& cb, int degree = 8,
                   Exec exec = Exec::Parallel);

/// Discrete Stokes projection S_h w: (grad(w - S_h w), grad phi_h) = 0 for
/// all discretely divergence-free phi_h.
CoeffVector stokes_projector(const Discretization& disc, const GradientField& grad_w, double tolerance = 1e-10,
                             Exec exec = Exec::Parallel);

/// sup over discretely divergence-free v_h of (psi, div v_h) / ||grad v_h||,
/// computed as ||grad w_h|| of the Stokes solution with load (psi, div v).
double dual_norm_gradient(const Discretization& disc, const ScalarField& psi, double tolerance = 1e-10,
                          Exec exec = Exec::Parallel);

/// ||psi - pi_Q psi|| with pi_Q the L2 projection onto a discontinuous
/// pressure space.
double pressure_projection_error(const FESpace& pressure, const ScalarField& psi, int degree = 12);

/// |u - u_h|^2 = |u - S_h u|^2 + |S_h u - u_h|^2 in the H1 seminorm when
/// u_h - S_h u is discretely divergence-free.
struct PythagorasSplit {
    double total = 0.0;
    double approximation = 0.0;
    double discrete = 0.0;
    double defect() const { return total - approximation - discrete; }
};

PythagorasSplit pythagoras_split(const FESpace& velocity, const Vector& u_h, const Vector& s_h_u,
                                 const GradientField& grad_u, int degree = 12, Exec exec = Exec::Parallel);

/// Largest ||v_h - Pi v_h|| / ||grad v_h|| over discretely divergence-free
/// v_h (power iteration on the generalized eigenproblem).
double reconstruction_ratio(const Discretization& disc, int iterations = 60, Exec exec = Exec::Parallel);

}  // namespace prc
