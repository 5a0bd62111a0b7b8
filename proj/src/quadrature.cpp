#include "prc/quadrature.hpp"

#include "prc/common.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <initializer_list>

namespace prc {

void gauss_jacobi(int n, double a, double b, std::vector<double>& nodes, std::vector<double>& weights)
{
    PRC_REQUIRE(n >= 1, "gauss_jacobi: need at least one node");
    // Golub-Welsch: eigen-decomposition of the symmetric Jacobi matrix of the
    // orthonormal Jacobi polynomials.
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k < n; ++k) {
        const double s = 2.0 * k + a + b;
        jac(k, k) = (k == 0) ? (b - a) / (a + b + 2.0) : (b * b - a * a) / (s * (s + 2.0));
        if (k + 1 < n) {
            const double m = k + 1.0;
            const double sm = 2.0 * m + a + b;
            const double off =
                std::sqrt(4.0 * m * (m + a) * (m + b) * (m + a + b) / (sm * sm * (sm + 1.0) * (sm - 1.0)));
            jac(k, k + 1) = off;
            jac(k + 1, k) = off;
        }
    }
    const double mu0 = std::pow(2.0, a + b + 1.0) * std::tgamma(a + 1.0) * std::tgamma(b + 1.0) /
                       std::tgamma(a + b + 2.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jac);
    nodes.resize(n);
    weights.resize(n);
    for (int k = 0; k < n; ++k) {
        nodes[k] = eig.eigenvalues()(k);
        const double v0 = eig.eigenvectors()(0, k);
        weights[k] = mu0 * v0 * v0;
    }
}

namespace {

QuadratureRule make_edge_rule(int degree)
{
    const int n = (degree + 2) / 2;
    std::vector<double> x, w;
    gauss_jacobi(n, 0.0, 0.0, x, w);
    QuadratureRule rule;
    rule.degree = degree;
    for (int k = 0; k < n; ++k) {
        const double t = 0.5 * (x[k] + 1.0);
        rule.points.push_back({t, 1.0 - t, 0.0});
        rule.weights.push_back(0.5 * w[k]);
    }
    return rule;
}

// Collapsed (Duffy) product rule (x, y) = (u (1 - v), v), symmetrized over the
// six permutations of the barycentric coordinates; coinciding points merge.
QuadratureRule make_triangle_rule(int degree)
{
    const int n = (degree + 2) / 2;
    std::vector<double> xu, wu, xv, wv;
    gauss_jacobi(n, 0.0, 0.0, xu, wu);
    gauss_jacobi(n, 1.0, 0.0, xv, wv);

    QuadratureRule rule;
    rule.degree = degree;
    auto add = [&rule](std::array<double, 3> p, double w) {
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const auto& r = rule.points[q];
            if (std::abs(r[0] - p[0]) < 1e-14 && std::abs(r[1] - p[1]) < 1e-14 && std::abs(r[2] - p[2]) < 1e-14) {
                rule.weights[q] += w;
                return;
            }
        }
        rule.points.push_back(p);
        rule.weights.push_back(w);
    };

    static constexpr int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double u = 0.5 * (xu[i] + 1.0);
            const double v = 0.5 * (xv[j] + 1.0);
            // weight (1 - v) dv du maps to (1 - t)/2 * dt/2 * du with du = ds/2
            const double w = 0.5 * wu[i] * 0.25 * wv[j];
            const double x = u * (1.0 - v);
            const double y = v;
            const std::array<double, 3> bary{1.0 - x - y, x, y};
            for (const auto& p : perms) add({bary[p[0]], bary[p[1]], bary[p[2]]}, w / 6.0);
        }
    }
    return rule;
}

// Compact fully symmetric rules (Strang-Fix / Dunavant). Weights are
// normalized to unit area; orbits: centroid, (a, a, 1-2a), (a, b, 1-a-b).
struct Orbit {
    int kind;
    double a, b, w;
};

QuadratureRule make_symmetric_rule(int degree, std::initializer_list<Orbit> orbits)
{
    QuadratureRule rule;
    rule.degree = degree;
    for (const Orbit& o : orbits) {
        const double w = 0.5 * o.w;
        if (o.kind == 1) {
            rule.points.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
            rule.weights.push_back(w);
        } else if (o.kind == 3) {
            const double c = 1.0 - 2.0 * o.a;
            for (const auto& p : {std::array{o.a, o.a, c}, std::array{o.a, c, o.a}, std::array{c, o.a, o.a}}) {
                rule.points.push_back(p);
                rule.weights.push_back(w);
            }
        } else {
            const double c = 1.0 - o.a - o.b;
            for (const auto& p : {std::array{o.a, o.b, c}, std::array{o.a, c, o.b}, std::array{o.b, o.a, c},
                                  std::array{o.b, c, o.a}, std::array{c, o.a, o.b}, std::array{c, o.b, o.a}}) {
                rule.points.push_back(p);
                rule.weights.push_back(w);
            }
        }
    }
    return rule;
}

QuadratureRule make_best_triangle_rule(int degree)
{
    switch (degree) {
    case 1: return make_symmetric_rule(1, {{1, 0.0, 0.0, 1.0}});
    case 2: return make_symmetric_rule(2, {{3, 1.0 / 6.0, 0.0, 1.0 / 3.0}});
    case 3:
    case 4:
        return make_symmetric_rule(4, {{3, 0.445948490915965, 0.0, 0.223381589678011},
                                       {3, 0.091576213509771, 0.0, 0.109951743655322}});
    case 5:
        return make_symmetric_rule(5, {{1, 0.0, 0.0, 0.225},
                                       {3, 0.470142064105115, 0.0, 0.132394152788506},
                                       {3, 0.101286507323456, 0.0, 0.125939180544827}});
    case 6:
        return make_symmetric_rule(6, {{3, 0.249286745170910, 0.0, 0.116786275726379},
                                       {3, 0.063089014491502, 0.0, 0.050844906370207},
                                       {6, 0.053145049844817, 0.310352451033784, 0.082851075618374}});
    case 7:
    case 8:
        return make_symmetric_rule(8, {{1, 0.0, 0.0, 0.144315607677787},
                                       {3, 0.459292588292723, 0.0, 0.095091634267285},
                                       {3, 0.170569307751760, 0.0, 0.103217370534718},
                                       {3, 0.050547228317031, 0.0, 0.032458497623198},
                                       {6, 0.008394777409958, 0.263112829634638, 0.027230314174435}});
    default: return make_triangle_rule(degree);
    }
}

struct RuleTables {
    std::array<QuadratureRule, kMaxQuadratureDegree + 1> triangle;
    std::array<QuadratureRule, kMaxQuadratureDegree + 1> edge;
};

const RuleTables& tables()
{
    static const RuleTables t = [] {
        RuleTables r;
        for (int d = 1; d <= kMaxQuadratureDegree; ++d) {
            r.triangle[d] = make_best_triangle_rule(d);
            r.edge[d] = make_edge_rule(d);
        }
        return r;
    }();
    return t;
}

void check_degree(int degree)
{
    if (degree < 1 || degree > kMaxQuadratureDegree)
        throw Error("quadrature: unsupported degree " + std::to_string(degree) + " (supported range 1.." +
                    std::to_string(kMaxQuadratureDegree) + ")");
}

}  // namespace

const QuadratureRule& triangle_rule(int degree)
{
    check_degree(degree);
    return tables().triangle[degree];
}

const QuadratureRule& edge_rule(int degree)
{
    check_degree(degree);
    return tables().edge[degree];
}

}  // namespace prc
