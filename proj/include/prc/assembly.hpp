#pragma once

#include "prc/common.hpp"
#include "prc/fe_space.hpp"
#include "prc/reconstruction.hpp"

#include <functional>

namespace prc {

/// Which argument of the mass form is reconstructed. The first letter refers
/// to the test function (row), the second to the trial function (column).
enum class MassMode { IdId, IdPi, PiId, PiPi };

/// Test-function treatment of load functionals.
enum class TestMode { Id, Pi };

struct AssemblyOptions {
    Exec exec = Exec::Parallel;
    int degree = 8;
    /// Constant multiplier on the integrand.
    double coefficient = 1.0;
};

inline AssemblyOptions data_options(Exec exec = Exec::Parallel) { return {exec, 12, 1.0}; }

/// A_ij = (grad phi_j, grad phi_i).
SparseMatrix assemble_vector_laplacian(const FESpace& velocity, const AssemblyOptions& opts = {});

/// B_ij = (div phi_j, psi_i); rows are pressure dofs.
SparseMatrix assemble_divergence(const FESpace& velocity, const FESpace& pressure, const AssemblyOptions& opts = {});

/// M_ij = (P_test phi_i, P_trial phi_j) restricted to `region`, where P is
/// the identity or the reconstruction according to `mode`. PiPi is assembled
/// elementwise as R_T^T M_BDM R_T.
SparseMatrix assemble_mass(const FESpace& velocity, MassMode mode, Region region,
                           const ReconstructionOperator* recon, const AssemblyOptions& opts = {});

/// F_i = (field, P phi_i) restricted to `region`.
Vector assemble_load(const FESpace& velocity, const VectorField& field, TestMode mode, Region region,
                     const ReconstructionOperator* recon, const AssemblyOptions& opts = data_options());

using GradientField = std::function<Mat2(const Vec2&)>;

/// F_i = (grad w, grad phi_i) for an analytic gradient of w.
Vector assemble_gradient_load(const FESpace& velocity, const GradientField& grad_w,
                              const AssemblyOptions& opts = data_options());

/// F_i = (psi, div phi_i).
Vector assemble_divergence_load(const FESpace& velocity, const ScalarField& psi,
                                const AssemblyOptions& opts = data_options());

/// m_i = integral of the pressure basis function i.
Vector pressure_integrals(const FESpace& pressure);

/// Element-loop driver shared by all matrix assemblers. `kernel(t, out)`
/// appends the triplets of element t. The parallel path splits the elements
/// into one contiguous chunk per thread and concatenates the chunks in
/// element order, so both paths produce identical triplet sequences.
using ElementKernel = std::function<void(int, std::vector<Triplet>&)>;
SparseMatrix assemble_from_elements(int rows, int cols, int num_elements, Exec exec, const ElementKernel& kernel);

/// Same driver for vectors: `kernel(t, local_values)` fills the element
/// contribution that is scattered through `dofs(t)`.
Vector assemble_vector_from_elements(const FESpace& space, Exec exec,
                                     const std::function<void(int, Eigen::Ref<Eigen::VectorXd>)>& kernel);

}  // namespace prc
