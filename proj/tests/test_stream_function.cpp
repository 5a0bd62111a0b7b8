#include "prc/analysis.hpp"
#include "prc/kkt.hpp"
#include "prc/quadrature.hpp"
#include "prc/stream_function.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace prc;
using namespace prc::testing;

namespace {

// psi = x^3 - 2 x^2 y + x y^2 + 3 y^3 - x y + 0.5
double cubic(const Vec2& p)
{
    const double x = p.x(), y = p.y();
    return x * x * x - 2 * x * x * y + x * y * y + 3 * y * y * y - x * y + 0.5;
}
Vec2 cubic_grad(const Vec2& p)
{
    const double x = p.x(), y = p.y();
    return {3 * x * x - 4 * x * y + y * y - y, -2 * x * x + 2 * x * y + 9 * y * y - x};
}
Mat2 cubic_hess(const Vec2& p)
{
    const double x = p.x(), y = p.y();
    Mat2 h;
    h << 6 * x - 4 * y, -4 * x + 2 * y - 1, -4 * x + 2 * y - 1, 2 * x + 18 * y;
    return h;
}

Barycentric sub_point(int k, double s, double t)
{
    // point of sub-triangle k (v_{k+1}, v_{k+2}, barycenter) in macro barycentrics
    Barycentric b{};
    const double g = 1.0 - s - t;
    for (int i = 0; i < 3; ++i) b[i] = t / 3.0;
    b[(k + 1) % 3] += g;
    b[(k + 2) % 3] += s;
    return b;
}

}  // namespace

TEST(StreamFunction, CubicsAreReproduced)
{
    const auto m = perturbed_square(3, 31);
    const CloughTocherSpace space(m);
    const Vector c = interpolate(space, ScalarField(cubic), VectorField(cubic_grad));
    for (int t = 0; t < m->num_triangles(); ++t)
        for (int k = 0; k < 3; ++k)
            for (const auto& q : triangle_rule(5).points) {
                const Barycentric b = sub_point(k, q[1], q[2]);
                const Vec2 x = b[0] * m->vertex(m->triangle(t)[0]) + b[1] * m->vertex(m->triangle(t)[1]) +
                               b[2] * m->vertex(m->triangle(t)[2]);
                const StreamValue v = evaluate(space, c, t, b);
                EXPECT_NEAR(v.psi, cubic(x), 1e-13);
                EXPECT_LE((v.grad - cubic_grad(x)).norm(), 1e-12);
                EXPECT_LE((v.hess - cubic_hess(x)).norm(), 1e-10);
            }
}

TEST(StreamFunction, RandomFunctionsAreC1)
{
    const auto m = perturbed_square(3, 37);
    const CloughTocherSpace space(m);
    const Vector c = random_vector(space.num_dofs(), 5);
    const auto& rule = edge_rule(5);
    // across macro edges
    for (int e = 0; e < m->num_edges(); ++e) {
        const auto adj = m->edge_triangles(e);
        if (adj[1] < 0) continue;
        const Vec2& a = m->vertex(m->edge(e)[0]);
        const Vec2& b = m->vertex(m->edge(e)[1]);
        for (const auto& p : rule.points) {
            const Vec2 x = a + p[0] * (b - a);
            const StreamValue v0 = evaluate(space, c, adj[0], bary_of(*m, adj[0], x));
            const StreamValue v1 = evaluate(space, c, adj[1], bary_of(*m, adj[1], x));
            EXPECT_NEAR(v0.psi, v1.psi, 1e-12);
            EXPECT_LE((v0.grad - v1.grad).norm(), 1e-11);
        }
    }
    // across the interior edges of the split: evaluate both adjacent sub-triangles
    for (int t = 0; t < m->num_triangles(); ++t) {
        const Vec2 g = m->centroid(t);
        for (int k = 0; k < 3; ++k) {
            const Vec2 v = m->vertex(m->triangle(t)[(k + 2) % 3]);  // shared by sub-triangles k and k+1
            for (const auto& p : rule.points) {
                const Vec2 x = v + p[0] * (g - v);
                CloughTocherSpace::Values a, b;
                space.eval(t, k, x, a);
                space.eval(t, (k + 1) % 3, x, b);
                const auto dofs = space.element_dofs(t);
                double pa = 0, pb = 0;
                Vec2 ga = Vec2::Zero(), gb = Vec2::Zero();
                for (int i = 0; i < 12; ++i) {
                    pa += c[dofs[i]] * a.value[i];
                    pb += c[dofs[i]] * b.value[i];
                    ga += c[dofs[i]] * a.grad[i];
                    gb += c[dofs[i]] * b.grad[i];
                }
                EXPECT_NEAR(pa, pb, 1e-12);
                EXPECT_LE((ga - gb).norm(), 1e-11);
            }
        }
    }
}

TEST(StreamFunction, BoundaryDofsClampVelocity)
{
    const auto m = square(4);
    const CloughTocherSpace space(m);
    Vector c = random_vector(space.num_dofs(), 8);
    for (int d : space.boundary_dofs()) c[d] = 0.0;
    for (int e = 0; e < m->num_edges(); ++e) {
        if (!m->is_boundary_edge(e)) continue;
        const int t = m->edge_triangles(e)[0];
        const Vec2& a = m->vertex(m->edge(e)[0]);
        const Vec2& b = m->vertex(m->edge(e)[1]);
        for (const auto& p : edge_rule(5).points) {
            const StreamValue v = evaluate(space, c, t, bary_of(*m, t, a + p[0] * (b - a)));
            EXPECT_LE(std::abs(v.psi), 1e-14);
            EXPECT_LE(v.velocity().norm(), 1e-13);
        }
    }
}

TEST(StreamFunction, CoefficientDumpRoundTrip)
{
    const CloughTocherSpace space(square(3));
    const Vector c = random_vector(space.num_dofs(), 4);
    std::stringstream ss;
    write_coeffs(ss, space, c);
    EXPECT_EQ(read_coeffs(ss, space), c);
}

TEST(StreamFunction, MatchesScottVogeliusOptimalitySystem)
{
    for (ExampleId ex : {ExampleId::Ex1, ExampleId::Ex2}) {
        const int n = 5;
        const double nu = 1e-2, alpha = 1e-3;
        const ExampleData data = example_data(ex, nu, 0.0);
        SchemeConfig cfg;
        cfg.scheme = Scheme::ScottVogelius;
        cfg.nu = nu;
        cfg.alpha = alpha;
        cfg.example = ex;

        const Discretization sv = make_discretization(scheme_mesh(n, ex, Scheme::ScottVogelius), Scheme::ScottVogelius);
        const SolutionFields direct = solve_control_problem(sv, cfg, data);

        const auto macro = std::make_shared<const Triangulation>(
            build_unit_square(n, ex == ExampleId::Ex2 ? RegionTagging::ThreeStrips : RegionTagging::None));
        const StreamSolution stream = solve_stream_control_problem(macro, cfg, data, 1e-10);
        const ReferenceSolution ref(ReferenceKey{ex, nu, alpha, n}, stream.space, stream.psi_u, stream.psi_z);

        double scale = 0.0, diff = 0.0;
        for (int t = 0; t < sv.mesh->num_triangles(); ++t) {
            const ElementGeometry geo = ElementGeometry::of(*sv.mesh, t);
            for (const auto& b : triangle_rule(4).points) {
                const ReferenceValue r = ref.at(geo.map(b));
                const PointValue u = evaluate(*sv.velocity, direct.u, t, b);
                const PointValue z = evaluate(*sv.velocity, direct.z, t, b);
                scale = std::max({scale, u.value.norm(), z.value.norm()});
                diff = std::max({diff, (u.value - r.u).norm(), (z.value - r.z).norm(), (u.grad - r.grad_u).norm(),
                                 (z.grad - r.grad_z).norm()});
            }
        }
        EXPECT_GT(scale, 0.0);
        EXPECT_LE(diff, 1e-8 * scale) << "example " << static_cast<int>(ex);
    }
}
