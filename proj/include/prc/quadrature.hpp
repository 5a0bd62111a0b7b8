#pragma once

#include <array>
#include <vector>

namespace prc {

inline constexpr int kMaxQuadratureDegree = 12;

/// Quadrature on the reference triangle {x, y >= 0, x + y <= 1} (weights sum
/// to 1/2) or on the reference edge [0, 1] (weights sum to 1).
///
/// Triangle points are barycentric triples (l0, l1, l2) with reference
/// coordinates (x, y) = (l1, l2). Edge points use only l0 as the abscissa t.
struct QuadratureRule {
    std::vector<std::array<double, 3>> points;
    std::vector<double> weights;
    int degree = 0;

    std::size_t size() const { return weights.size(); }
};

/// Symmetric rule with positive weights exact for polynomials of total degree
/// `degree` (1..12).
const QuadratureRule& triangle_rule(int degree);

/// Gauss-Legendre rule on [0, 1] exact to `degree` (1..12).
const QuadratureRule& edge_rule(int degree);

/// Nodes and weights of the n-point Gauss-Jacobi rule for the weight
/// (1 - t)^a (1 + t)^b on [-1, 1].
void gauss_jacobi(int n, double a, double b, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace prc
