#pragma once

#include "prc/common.hpp"
#include "prc/problem.hpp"
#include "prc/stream_function.hpp"

#include <functional>
#include <memory>
#include <string>

namespace prc {

/// Unknown layout of the optimality system: u, p, z, lambda followed by the
/// two zero-mean multipliers of p and lambda.
struct KktLayout {
    int nv = 0;
    int nq = 0;

    int u() const { return 0; }
    int p() const { return nv; }
    int z() const { return nv + nq; }
    int lambda() const { return 2 * nv + nq; }
    int mean_p() const { return 2 * nv + 2 * nq; }
    int mean_lambda() const { return 2 * nv + 2 * nq + 1; }
    int size() const { return 2 * nv + 2 * nq + 2; }
    std::string block_name(int unknown) const;
};

struct BuildOptions {
    Exec exec = Exec::Parallel;
    int assembly_degree = 8;
    int data_degree = 12;
    /// Test hook: replaces every reconstruction by the identity.
    bool identity_reconstruction = false;
};

/// Assembled optimality system
///   [ nu A      B^T   c M_c1   0  ] [u]   [F]
///   [ B         0     0        0  ] [p] = [0]
///   [ -c M_c2   0     nu A     B^T] [z]   [G]
///   [ 0         0     B        0  ] [l]   [0]
/// with c = alpha^{-1/2}, plus zero-mean rows for p and lambda. Homogeneous
/// Dirichlet rows and columns of u and z are replaced by the identity.
struct KktSystem {
    KktLayout layout;
    SparseMatrix matrix;
    Vector rhs;
    SchemeConfig config;

    /// Blocks before boundary elimination, kept for inspection.
    SparseMatrix stiffness;
    SparseMatrix divergence;
    SparseMatrix state_coupling;    // + c M_c1 (row u, column z)
    SparseMatrix adjoint_coupling;  // - c M_c2 (row z, column u)
    Vector state_load;              // F
    Vector adjoint_load;            // G
};

KktSystem build_system(const Discretization& disc, const SchemeConfig& cfg, const ExampleData& data,
                       const BuildOptions& opts = {});

struct SolutionFields {
    Scheme scheme = Scheme::Classical;
    Vector u, p, z, lambda;
    /// Control coefficients; lives in `control_space` (velocity space or BDM1).
    Vector q;
    SpacePtr control_space;
    double relative_residual = 0.0;
};

/// Sparse LU solve of the assembled system (UMFPACK). Throws SolverError on a
/// singular factorization naming the block of the zero pivot, or when the
/// relative residual stays above the tolerance after refinement.
SolutionFields solve(const KktSystem& system);

/// q = -alpha^{-1/2} z (Classical, Scott-Vogelius) or -alpha^{-1/2} Pi z.
void recover_control(SolutionFields& fields, const Discretization& disc, const SchemeConfig& cfg);

/// build_system + solve + recover_control.
SolutionFields solve_control_problem(const Discretization& disc, const SchemeConfig& cfg, const ExampleData& data,
                                     const BuildOptions& opts = {});

using UnknownNamer = std::function<std::string(int)>;

/// Sparse LU factorization (UMFPACK) with residual-controlled solves. A few
/// dense border rows and columns, such as the zero-mean multipliers, are
/// eliminated by a low-rank update so that they do not enter the sparse
/// factorization. `namer` maps an unknown index to a block name for the
/// singular-matrix diagnostic.
class SparseDirectSolver {
public:
    SparseDirectSolver(const SparseMatrix& matrix, UnknownNamer namer);
    ~SparseDirectSolver();
    SparseDirectSolver(const SparseDirectSolver&) = delete;
    SparseDirectSolver& operator=(const SparseDirectSolver&) = delete;

    /// Solves with iterative refinement; throws SolverError when the relative
    /// residual stays above `tolerance`.
    Vector solve(const Vector& rhs, double tolerance, double* residual_out = nullptr) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct StokesSolution {
    Vector u, p;
    double relative_residual = 0.0;
};

/// nu (grad u, grad v) + (div v, p) = rhs(v), (div u, q) = 0, mean(p) = 0,
/// homogeneous Dirichlet data. `rhs` is an assembled velocity load.
StokesSolution solve_stokes(const Discretization& disc, double nu, const Vector& rhs, double tolerance = 1e-10,
                            Exec exec = Exec::Parallel);

/// Factorized Stokes matrix of solve_stokes for repeated solves.
class StokesFactorization {
public:
    StokesFactorization(const Discretization& disc, double nu, double tolerance = 1e-10, Exec exec = Exec::Parallel);

    StokesSolution solve(const Vector& rhs) const;

private:
    SpacePtr velocity_;
    int nv_ = 0;
    int nq_ = 0;
    double tolerance_ = 1e-10;
    SparseDirectSolver solver_;
};

/// Stokes solve with body force f tested against phi (Id) or Pi phi (Pi).
StokesSolution solve_forward_stokes(const Discretization& disc, double nu, const VectorField& f, TestMode mode,
                                    double tolerance = 1e-10, Exec exec = Exec::Parallel);

/// One-shot convenience wrapper around SparseDirectSolver.
Vector solve_sparse(const SparseMatrix& matrix, const Vector& rhs, double tolerance, const UnknownNamer& namer,
                    double* residual_out = nullptr);

/// Right-hand side of build_system for the given data (used to re-solve a
/// factorized system for another perturbation amplitude).
Vector build_rhs(const KktSystem& system, const Discretization& disc, const ExampleData& data,
                 const BuildOptions& opts = {});

/// Factorized optimality system; solves for any right-hand side.
class KktFactorization {
public:
    explicit KktFactorization(const KktSystem& system);

    SolutionFields solve(const Vector& rhs) const;

private:
    KktLayout layout_;
    SchemeConfig config_;
    SparseDirectSolver solver_;
};

/// Divergence-free (Scott-Vogelius) optimality system posed on curl of the
/// Hsieh-Clough-Tocher space of the macro mesh:
///   [ nu A      c M_C ] [psi_u]   [ (f, curl phi)           ]
///   [ -c M_O    nu A  ] [psi_z] = [ -c (u^d, curl phi)_O     ]
/// with A = (D^2 psi, D^2 phi) and M = (grad psi, grad phi). Its velocity and
/// adjoint coincide with the Scott-Vogelius solution on the barycentric split
/// of the macro mesh; the pressure is not computed. The fourth-order system
/// has condition number O(h^-4), so it gets its own residual tolerance
/// (relative, after symmetric diagonal scaling).
struct StreamSolution {
    StreamSpacePtr space;
    Vector psi_u;
    Vector psi_z;
    double relative_residual = 0.0;
};

StreamSolution solve_stream_control_problem(MeshPtr macro_mesh, const SchemeConfig& cfg, const ExampleData& data,
                                            double tolerance = 1e-8, Exec exec = Exec::Parallel);

}  // namespace prc
