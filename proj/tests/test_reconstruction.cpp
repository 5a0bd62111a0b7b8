#include "prc/analysis.hpp"
#include "prc/problem.hpp"
#include "prc/quadrature.hpp"
#include "prc/reconstruction.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>
#include <omp.h>

#include <cmath>
#include <numbers>

using namespace prc;
using namespace prc::testing;

namespace {

struct Pair {
    MeshPtr mesh;
    SpacePtr br, bdm, p0;
    ReconstructionOperator recon;

    explicit Pair(MeshPtr m)
        : mesh(m), br(build_space(m, Family::BR_velocity)), bdm(build_space(m, Family::BDM1)),
          p0(build_space(m, Family::P0_pressure)), recon(br, bdm, Exec::Serial)
    {
    }
};

}  // namespace

TEST(Reconstruction, ConstantsAreReproduced)
{
    Pair s(perturbed_square(3, 1));
    const VectorField c = [](const Vec2&) { return Vec2(0.3, -1.7); };
    const Vector r = s.recon.apply(interpolate(*s.br, c));
    EXPECT_LE((r - interpolate(*s.bdm, c)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Reconstruction, ContinuousLinearFieldsAreReproduced)
{
    Pair s(perturbed_square(4, 2));
    const VectorField f = [](const Vec2& x) { return Vec2(1.0 + 2.0 * x.x() - x.y(), 0.5 * x.x() + 3.0 * x.y()); };
    const Vector r = s.recon.apply(interpolate(*s.br, f));
    for (int t = 0; t < s.mesh->num_triangles(); ++t) {
        const ElementGeometry geo = ElementGeometry::of(*s.mesh, t);
        for (const auto& b : triangle_rule(4).points)
            EXPECT_LE((evaluate(*s.bdm, r, t, b).value - f(geo.map(b))).norm(), 1e-13);
    }
}

TEST(Reconstruction, SingleEdgeBubble)
{
    Pair s(perturbed_square(3, 3));
    const int nv = s.mesh->num_vertices();
    // brute force: solve the 2x2 moment system of the trace n.n phi_E = 6 s (1 - s)
    // against the mean and linear functionals on the edge
    Eigen::Matrix2d gram;
    Eigen::Vector2d rhs = Eigen::Vector2d::Zero();
    gram.setZero();
    const auto& rule = edge_rule(9);
    for (std::size_t q = 0; q < rule.size(); ++q) {
        const double t = rule.points[q][0], w = rule.weights[q];
        const Eigen::Vector2d test(1.0, 3.0 * (2.0 * t - 1.0));
        const Eigen::Vector2d trial(1.0, 2.0 * t - 1.0);  // linear trace basis
        gram += w * test * trial.transpose();
        rhs += w * test * 6.0 * t * (1.0 - t);
    }
    const Eigen::Vector2d trace = gram.lu().solve(rhs);
    const Eigen::Vector2d moments = gram * trace;
    EXPECT_NEAR(moments[0], 1.0, 1e-14);
    EXPECT_NEAR(moments[1], 0.0, 1e-14);

    for (int e = 0; e < s.mesh->num_edges(); ++e) {
        if (s.mesh->is_boundary_edge(e)) continue;
        Vector v = Vector::Zero(s.br->num_dofs());
        v[2 * nv + e] = 1.0;
        const Vector r = s.recon.apply(v);
        for (int i = 0; i < r.size(); ++i) {
            const double expected = i == 2 * e ? moments[0] : (i == 2 * e + 1 ? moments[1] : 0.0);
            EXPECT_NEAR(r[i], expected, 1e-14) << "edge " << e << " dof " << i;
        }
    }
}

TEST(Reconstruction, DiscretelyDivergenceFreeMapsToDivergenceFree)
{
    Pair s(perturbed_square(4, 4));
    const Eigen::MatrixXd basis = divergence_free_basis(*s.br, *s.p0);
    ASSERT_GT(basis.cols(), 0);
    for (unsigned k = 0; k < 20; ++k) {
        const Vector v = random_combination(basis, 100 + k);
        const Vector r = s.recon.apply(v);
        for (int t = 0; t < s.mesh->num_triangles(); ++t)
            for (const auto& b : triangle_rule(4).points) EXPECT_LE(std::abs(evaluate(*s.bdm, r, t, b).div), 1e-12);
        // normal trace on the boundary vanishes
        for (int e = 0; e < s.mesh->num_edges(); ++e)
            if (s.mesh->is_boundary_edge(e)) {
                EXPECT_LE(std::abs(r[2 * e]), 1e-12);
                EXPECT_LE(std::abs(r[2 * e + 1]), 1e-12);
            }
    }
}

TEST(Reconstruction, ElementwiseDivergenceIdentity)
{
    Pair s(perturbed_square(3, 5));
    const Vector v = random_vector(s.br->num_dofs(), 6);
    const Vector r = s.recon.apply(v);
    const auto& rule = edge_rule(5);
    for (int t = 0; t < s.mesh->num_triangles(); ++t) {
        double flux = 0.0;
        for (int k = 0; k < 3; ++k) {
            const int e = s.mesh->triangle_edges(t)[k];
            const Vec2 n = s.mesh->edge_normal(e) * s.mesh->triangle_edge_signs(t)[k];
            for (std::size_t q = 0; q < rule.size(); ++q) {
                Barycentric b{0, 0, 0};
                b[(k + 1) % 3] = 1.0 - rule.points[q][0];
                b[(k + 2) % 3] = rule.points[q][0];
                flux += rule.weights[q] * s.mesh->edge_length(e) * evaluate(*s.br, v, t, b).value.dot(n);
            }
        }
        const double div = evaluate(*s.bdm, r, t, {1.0 / 3, 1.0 / 3, 1.0 / 3}).div;
        EXPECT_NEAR(div, flux / s.mesh->area(t), 1e-12);
    }
}

TEST(Reconstruction, Linearity)
{
    Pair s(square(3));
    const Vector v = random_vector(s.br->num_dofs(), 7);
    const Vector w = random_vector(s.br->num_dofs(), 8);
    EXPECT_EQ(s.recon.apply(Vector::Zero(s.br->num_dofs())), Vector::Zero(s.bdm->num_dofs()));
    const Vector lhs = s.recon.apply(2.5 * v - 0.75 * w);
    const Vector rhs = 2.5 * s.recon.apply(v) - 0.75 * s.recon.apply(w);
    EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Reconstruction, StabilityBound)
{
    const double cf = 1.0 / (std::numbers::sqrt2 * std::numbers::pi);
    for (int n : {4, 8}) {
        Pair s(square(n));
        const double h = s.mesh->max_edge_length();
        for (unsigned k = 0; k < 10; ++k) {
            Vector v = random_vector(s.br->num_dofs(), 20 + k);
            for (int d : s.br->boundary_dofs()) v[d] = 0.0;
            const double lhs = l2_norm(*s.bdm, s.recon.apply(v));
            EXPECT_LE(lhs, 2.0 * (h + cf) * h1_seminorm(*s.br, v));
        }
    }
}

TEST(Reconstruction, InterpolationEstimateRate)
{
    const ExampleData data = example_data(ExampleId::Ex1, 1.0, 0.0);
    std::vector<double> errors;
    for (int n : {10, 20, 40}) {
        Pair s(square(n));
        errors.push_back(l2_error(*s.bdm, s.recon.apply(interpolate(*s.br, data.u)), data.u));
    }
    for (const auto& r : eoc(errors)) {
        ASSERT_TRUE(r.has_value());
        EXPECT_GE(*r, 0.9);
    }
}

TEST(Reconstruction, SerialAndParallelAgreeBitwise)
{
    const int saved = omp_get_max_threads();
    omp_set_num_threads(4);
    const auto m = square(12);
    const auto br = build_space(m, Family::BR_velocity);
    const auto bdm = build_space(m, Family::BDM1);
    const ReconstructionOperator a(br, bdm, Exec::Serial);
    const ReconstructionOperator b(br, bdm, Exec::Parallel);
    ASSERT_EQ(a.matrix().nonZeros(), b.matrix().nonZeros());
    EXPECT_EQ(Eigen::MatrixXd(a.matrix()), Eigen::MatrixXd(b.matrix()));
    omp_set_num_threads(saved);
}

TEST(Reconstruction, RejectsMismatchedMeshes)
{
    const auto br = build_space(square(2), Family::BR_velocity);
    const auto bdm = build_space(square(2), Family::BDM1);
    EXPECT_THROW(build_reconstruction(br, bdm), Error);
}
