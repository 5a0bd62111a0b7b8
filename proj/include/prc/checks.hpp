#pragma once

#include "prc/common.hpp"
#include "prc/problem.hpp"

#include <string>
#include <vector>

namespace prc {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Forward Stokes solve with the gradient force grad(cos x sin y), nu = 1:
/// reconstructed and Scott-Vogelius velocities vanish, the classical one
/// converges at first order. Also bounds the runtime per level.
CheckResult check_gradient_force(const std::vector<int>& levels, double max_seconds = 10.0);

/// Forward solve with f = -nu Laplace(u) of the Example 1 flow: velocity
/// errors against the exact u converge (energy rate near 1, or 2 for
/// Scott-Vogelius).
CheckResult check_forward_exact(const std::vector<int>& levels, double nu = 1.0);

/// FullRobust and ScottVogelius solutions do not depend on eps; Classical does.
CheckResult check_eps_invariance(int n, double nu, double alpha);

/// Solution(eps) - Solution(0) = eps (Solution(1) - Solution(0)) for every
/// example, scheme, nu and alpha on one level.
CheckResult check_eps_linearity(int n, const std::vector<double>& nus, const std::vector<double>& alphas,
                                double eps = 1e-4);

/// With the reconstruction replaced by the identity, Classical,
/// PartialRobust and FullRobust coincide.
CheckResult check_scheme_equivalence(int n, double nu, double alpha);

/// Stokes projector orthogonality and L2 rate, worst-case reconstruction
/// ratio rate and pointwise divergence of reconstructed discretely
/// divergence-free functions.
CheckResult check_projector_suite(const std::vector<int>& levels, int samples = 20);

/// Dual norm of grad(cos x sin y): zero for Scott-Vogelius, bounded by the
/// pressure projection error and first order for Bernardi-Raugel.
CheckResult check_dual_norm(const std::vector<int>& levels);

std::string format_result(const CheckResult& r);

}  // namespace prc
