#include "prc/assembly.hpp"
#include "prc/problem.hpp"
#include "prc/quadrature.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>
#include <omp.h>

#include <cmath>

using namespace prc;
using namespace prc::testing;

namespace {

struct BrSpaces {
    MeshPtr mesh;
    SpacePtr br, bdm, p0;
    ReconstructionOperator recon;

    explicit BrSpaces(MeshPtr m)
        : mesh(m), br(build_space(m, Family::BR_velocity)), bdm(build_space(m, Family::BDM1)),
          p0(build_space(m, Family::P0_pressure)), recon(br, bdm, Exec::Serial)
    {
    }
};

const AssemblyOptions kSerial{Exec::Serial, 8, 1.0};

const VectorField kGradientForce = [](const Vec2& x) {
    return Vec2(-std::sin(x.x()) * std::sin(x.y()), std::cos(x.x()) * std::cos(x.y()));
};

double relative_asymmetry(const SparseMatrix& a)
{
    return max_abs(SparseMatrix(a - SparseMatrix(a.transpose()))) / max_abs(a);
}

}  // namespace

TEST(Assembly, ReferenceTriangleStiffness)
{
    const auto mesh = std::make_shared<const Triangulation>(
        std::vector<Vec2>{Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)}, std::vector<std::array<int, 3>>{{0, 1, 2}},
        std::vector<Region>{Region::Whole}, 1, false);
    const auto br = build_space(mesh, Family::BR_velocity);
    const Eigen::MatrixXd a(assemble_vector_laplacian(*br, kSerial));
    Eigen::Matrix3d expected;
    expected << 1, -0.5, -0.5, -0.5, 0.5, 0, -0.5, 0, 0.5;
    EXPECT_LE((a.block(0, 0, 3, 3) - expected).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LE((a.block(3, 3, 3, 3) - expected).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LE(a.block(0, 3, 3, 3).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Assembly, LaplacianKernelIsConstants)
{
    BrSpaces s(perturbed_square(2, 1));
    const SparseMatrix a = assemble_vector_laplacian(*s.br, kSerial);
    EXPECT_LE(relative_asymmetry(a), 1e-12);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig((Eigen::MatrixXd(a)));
    const auto& ev = eig.eigenvalues();
    EXPECT_GE(ev.minCoeff(), -1e-12 * ev.maxCoeff());
    int zeros = 0;
    for (int i = 0; i < ev.size(); ++i) zeros += ev[i] < 1e-10 * ev.maxCoeff() ? 1 : 0;
    EXPECT_EQ(zeros, 2);
    for (const Vec2 c : {Vec2(1, 0), Vec2(0, 1)}) {
        const Vector v = interpolate(*s.br, VectorField([c](const Vec2&) { return c; }));
        EXPECT_LE((a * v).cwiseAbs().maxCoeff(), 1e-13);
    }
}

TEST(Assembly, DivergenceOfInterpolatedFields)
{
    BrSpaces s(perturbed_square(3, 2));
    const SparseMatrix b = assemble_divergence(*s.br, *s.p0, kSerial);
    const Vector c = interpolate(*s.br, VectorField([](const Vec2&) { return Vec2(1.0, -2.0); }));
    EXPECT_LE((b * c).cwiseAbs().maxCoeff(), 1e-14);
    const Vector r = b * interpolate(*s.br, VectorField([](const Vec2& x) { return x; }));
    for (int t = 0; t < s.mesh->num_triangles(); ++t) EXPECT_NEAR(r[t], 2.0 * s.mesh->area(t), 1e-14);
}

TEST(Assembly, ScottVogeliusDiscretelyDivergenceFreeIsPointwise)
{
    const auto mesh = scheme_mesh(2, ExampleId::Ex1, Scheme::ScottVogelius);
    const auto p2 = build_space(mesh, Family::P2_velocity);
    const auto p1 = build_space(mesh, Family::P1disc_pressure);
    const Eigen::MatrixXd basis = divergence_free_basis(*p2, *p1);
    ASSERT_GT(basis.cols(), 0);
    for (unsigned k = 0; k < 10; ++k) {
        const Vector v = random_combination(basis, 40 + k);
        for (int t = 0; t < mesh->num_triangles(); ++t)
            for (const auto& b : triangle_rule(4).points) EXPECT_LE(std::abs(evaluate(*p2, v, t, b).div), 1e-11);
    }
}

TEST(Assembly, MassExamples)
{
    BrSpaces s(square(5, RegionTagging::ThreeStrips));
    const Vector ones = interpolate(*s.br, VectorField([](const Vec2&) { return Vec2(1, 1); }));
    const SparseMatrix m = assemble_mass(*s.br, MassMode::IdId, Region::Whole, nullptr, kSerial);
    EXPECT_NEAR(ones.dot(m * ones), 2.0, 1e-14);

    const Vector ex = interpolate(*s.br, VectorField([](const Vec2&) { return Vec2(1, 0); }));
    const SparseMatrix mc = assemble_mass(*s.br, MassMode::IdId, Region::C, nullptr, kSerial);
    EXPECT_NEAR(ex.dot(mc * ex), 0.4, 1e-14);

    const Vector lin = interpolate(*s.br, VectorField([](const Vec2& x) { return Vec2(x.y() - 0.5, 2.0 * x.x()); }));
    const SparseMatrix pp = assemble_mass(*s.br, MassMode::PiPi, Region::Whole, &s.recon, kSerial);
    const double id = lin.dot(m * lin), pi = lin.dot(pp * lin);
    EXPECT_LE(std::abs(id - pi), 1e-12 * id);
}

TEST(Assembly, MassModesAreAdjointConsistent)
{
    BrSpaces s(perturbed_square(4, 3));
    const SparseMatrix ip = assemble_mass(*s.br, MassMode::IdPi, Region::Whole, &s.recon, kSerial);
    const SparseMatrix pi = assemble_mass(*s.br, MassMode::PiId, Region::Whole, &s.recon, kSerial);
    EXPECT_EQ(Eigen::MatrixXd(ip), Eigen::MatrixXd(SparseMatrix(pi.transpose())));
    const SparseMatrix pp = assemble_mass(*s.br, MassMode::PiPi, Region::Whole, &s.recon, kSerial);
    EXPECT_LE(relative_asymmetry(pp), 1e-14);
    // PiPi is R^T M_BDM R
    const SparseMatrix mb = assemble_mass(*s.bdm, MassMode::IdId, Region::Whole, nullptr, kSerial);
    const SparseMatrix rmr = SparseMatrix(s.recon.matrix().transpose()) * mb * s.recon.matrix();
    EXPECT_LE(max_abs(SparseMatrix(pp - rmr)), 1e-14);
    EXPECT_THROW(assemble_mass(*s.br, MassMode::PiPi, Region::Whole, nullptr, kSerial), Error);
}

TEST(Assembly, RegionAdditivity)
{
    BrSpaces s(square(10, RegionTagging::ThreeStrips));
    for (MassMode mode : {MassMode::IdId, MassMode::IdPi, MassMode::PiPi}) {
        SparseMatrix sum = assemble_mass(*s.br, mode, Region::C, &s.recon, kSerial);
        sum += assemble_mass(*s.br, mode, Region::F, &s.recon, kSerial);
        sum += assemble_mass(*s.br, mode, Region::O, &s.recon, kSerial);
        const SparseMatrix whole = assemble_mass(*s.br, mode, Region::Whole, &s.recon, kSerial);
        EXPECT_LE(max_abs(SparseMatrix(sum - whole)), 1e-13);
    }
}

TEST(Assembly, LinearInCoefficient)
{
    BrSpaces s(perturbed_square(3, 4));
    const SparseMatrix a1 = assemble_vector_laplacian(*s.br, kSerial);
    const SparseMatrix a3 = assemble_vector_laplacian(*s.br, {Exec::Serial, 8, 3.0});
    EXPECT_LE(max_abs(SparseMatrix(a3 - 3.0 * a1)), 1e-13 * max_abs(a1));
    const SparseMatrix m1 = assemble_mass(*s.br, MassMode::PiPi, Region::Whole, &s.recon, kSerial);
    const SparseMatrix m3 = assemble_mass(*s.br, MassMode::PiPi, Region::Whole, &s.recon, {Exec::Serial, 8, -2.0});
    EXPECT_LE(max_abs(SparseMatrix(m3 + 2.0 * m1)), 1e-13 * max_abs(m1));
}

TEST(Assembly, GradientLoadIsInvisibleToReconstructedTests)
{
    BrSpaces s(square(4));
    const Eigen::MatrixXd basis = divergence_free_basis(*s.br, *s.p0);
    const Vector fpi = assemble_load(*s.br, kGradientForce, TestMode::Pi, Region::Whole, &s.recon);
    const Vector fid = assemble_load(*s.br, kGradientForce, TestMode::Id, Region::Whole, &s.recon);
    const double pi = (basis.transpose() * fpi).norm();
    const double id = (basis.transpose() * fid).norm();
    EXPECT_LE(pi, 1e-10);
    EXPECT_GE(id, 1e3 * std::max(pi, 1e-16));
    EXPECT_GT(id, 1e-6);
    const Vector zero = assemble_load(*s.br, VectorField([](const Vec2&) { return Vec2(0, 0); }), TestMode::Pi,
                                      Region::Whole, &s.recon);
    EXPECT_EQ(zero, Vector::Zero(s.br->num_dofs()));
}

TEST(Assembly, SerialAndParallelAreBitIdentical)
{
    const int saved = omp_get_max_threads();
    omp_set_num_threads(4);
    BrSpaces s(square(20, RegionTagging::ThreeStrips));
    const AssemblyOptions par{Exec::Parallel, 8, 1.0};
    auto same = [](const SparseMatrix& a, const SparseMatrix& b) {
        return a.nonZeros() == b.nonZeros() && Eigen::MatrixXd(a) == Eigen::MatrixXd(b);
    };
    EXPECT_TRUE(same(assemble_vector_laplacian(*s.br, kSerial), assemble_vector_laplacian(*s.br, par)));
    EXPECT_TRUE(same(assemble_divergence(*s.br, *s.p0, kSerial), assemble_divergence(*s.br, *s.p0, par)));
    for (MassMode mode : {MassMode::IdId, MassMode::IdPi, MassMode::PiPi})
        EXPECT_TRUE(same(assemble_mass(*s.br, mode, Region::O, &s.recon, kSerial),
                         assemble_mass(*s.br, mode, Region::O, &s.recon, par)));
    EXPECT_EQ(assemble_load(*s.br, kGradientForce, TestMode::Pi, Region::C, &s.recon, data_options(Exec::Serial)),
              assemble_load(*s.br, kGradientForce, TestMode::Pi, Region::C, &s.recon, data_options(Exec::Parallel)));

    const auto sv_mesh = scheme_mesh(10, ExampleId::Ex2, Scheme::ScottVogelius);
    const auto p2 = build_space(sv_mesh, Family::P2_velocity);
    const auto p1 = build_space(sv_mesh, Family::P1disc_pressure);
    EXPECT_TRUE(same(assemble_divergence(*p2, *p1, kSerial), assemble_divergence(*p2, *p1, par)));
    omp_set_num_threads(saved);
}
