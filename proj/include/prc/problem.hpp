#pragma once

#include "prc/assembly.hpp"
#include "prc/common.hpp"
#include "prc/fe_space.hpp"
#include "prc/mesh.hpp"

#include <string>

namespace prc {

/// Discretization schemes. The Bernardi-Raugel schemes differ only in where
/// the reconstruction enters (observation / test functions):
///   Classical      id / id
///   PartialRobust  id / Pi
///   FullRobust     Pi / Pi
/// ScottVogelius is the divergence-free P2 x P1disc pair with id / id.
enum class Scheme { Classical, PartialRobust, FullRobust, ScottVogelius };

std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);

enum class ExampleId { Ex1 = 1, Ex2 = 2 };

struct SchemeConfig {
    Scheme scheme = Scheme::Classical;
    double nu = 1.0;
    double alpha = 1e-1;
    double eps = 0.0;
    ExampleId example = ExampleId::Ex1;
    double tolerance = 1e-10;
};

void validate(const SchemeConfig& cfg);

/// Test-function treatment of the observation (first) and state (second)
/// pairings for a scheme.
TestMode observation_mode(Scheme s);
TestMode state_mode(Scheme s);

/// Analytic data of the two model problems.
///
/// u = curl(x^4 (x-1)^4 y^4 (y-1)^4) = (d_y psi, -d_x psi) is the target
/// flow. Example 1 uses f = 0 and u^d = u + eps grad(cos x sin y) on the whole
/// domain. Example 2 uses f = -nu Laplace(u), control on C, observation on O
/// and u^d = u + eps grad(sin(x - 0.6) cos y).
struct ExampleData {
    VectorField u;
    GradientField grad_u;
    VectorField laplace_u;
    VectorField f;
    VectorField ud;
    /// Gradient of the perturbation potential (without eps).
    VectorField perturbation;
    ScalarField perturbation_potential;
    Region control_region = Region::Whole;
    Region observation_region = Region::Whole;
};

ExampleData example_data(ExampleId id, double nu, double eps);

/// Stream function pieces a(s) = s^4 (s - 1)^4 and its derivatives.
double stream_factor(double s, int derivative);

/// Velocity/pressure pair with the reconstruction (Bernardi-Raugel schemes).
struct Discretization {
    Scheme scheme = Scheme::Classical;
    MeshPtr mesh;
    SpacePtr velocity;
    SpacePtr pressure;
    std::shared_ptr<const ReconstructionOperator> recon;

    const ReconstructionOperator* reconstruction() const { return recon.get(); }
};

/// Builds the spaces of a scheme on the given mesh. Scott-Vogelius needs a
/// barycentrically refined mesh.
Discretization make_discretization(MeshPtr mesh, Scheme scheme, Exec exec = Exec::Parallel);

/// Mesh used by a scheme at level n: structured n x n (three strips for
/// Example 2), followed by a barycentric split for Scott-Vogelius.
MeshPtr scheme_mesh(int n, ExampleId example, Scheme scheme);

}  // namespace prc
