#include "prc/analysis.hpp"
#include "prc/kkt.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace prc;
using namespace prc::testing;

namespace {

const VectorField kZero = [](const Vec2&) { return Vec2(0.0, 0.0); };

const VectorField kGradientForce = [](const Vec2& x) {
    return Vec2(-std::sin(x.x()) * std::sin(x.y()), std::cos(x.x()) * std::cos(x.y()));
};

Discretization disc_for(int n, ExampleId ex, Scheme s) { return make_discretization(scheme_mesh(n, ex, s), s); }

SchemeConfig config(Scheme s, double nu, double alpha, double eps, ExampleId ex = ExampleId::Ex1)
{
    SchemeConfig c;
    c.scheme = s;
    c.nu = nu;
    c.alpha = alpha;
    c.eps = eps;
    c.example = ex;
    return c;
}

double rel_diff(const Vector& a, const Vector& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

constexpr Scheme kAllSchemes[] = {Scheme::Classical, Scheme::PartialRobust, Scheme::FullRobust,
                                  Scheme::ScottVogelius};

}  // namespace

TEST(Kkt, HomogeneousDataGiveZeroSolution)
{
    ExampleData data = example_data(ExampleId::Ex1, 1.0, 0.0);
    data.f = kZero;
    data.ud = kZero;
    const Discretization d = disc_for(4, ExampleId::Ex1, Scheme::Classical);
    const SolutionFields s = solve_control_problem(d, config(Scheme::Classical, 1.0, 1e-1, 0.0), data);
    EXPECT_EQ(s.u.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(s.z.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(s.p.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(s.q.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Kkt, CouplingBlocksPerScheme)
{
    for (ExampleId ex : {ExampleId::Ex1, ExampleId::Ex2}) {
        const ExampleData data = example_data(ex, 1e-3, 0.0);
        auto build = [&](Scheme s) { return build_system(disc_for(5, ex, s), config(s, 1e-3, 1e-3, 0.0, ex), data); };
        const KktSystem fr = build(Scheme::FullRobust);
        if (ex == ExampleId::Ex1) {
            const SparseMatrix diff = fr.state_coupling + SparseMatrix(fr.adjoint_coupling.transpose());
            EXPECT_LE(max_abs(diff), 1e-13 * max_abs(fr.state_coupling));
        }
        const KktSystem cl = build(Scheme::Classical);
        if (ex == ExampleId::Ex1)
            EXPECT_LE(max_abs(SparseMatrix(cl.state_coupling + cl.adjoint_coupling)), 1e-13 * max_abs(cl.state_coupling));
        const KktSystem pr = build(Scheme::PartialRobust);
        EXPECT_GT(max_abs(SparseMatrix(pr.state_coupling + SparseMatrix(pr.adjoint_coupling.transpose()))), 1e-6);
        // Ex2 couplings live on their regions
        if (ex == ExampleId::Ex2) EXPECT_LT(fr.state_coupling.nonZeros(), fr.stiffness.nonZeros());
    }
}

TEST(Kkt, RejectsInvalidConfigurations)
{
    const ExampleData data = example_data(ExampleId::Ex1, 1.0, 0.0);
    const Discretization br = disc_for(2, ExampleId::Ex1, Scheme::FullRobust);
    EXPECT_THROW(build_system(br, config(Scheme::FullRobust, 1.0, 0.0, 0.0), data), Error);
    EXPECT_THROW(build_system(br, config(Scheme::FullRobust, -1.0, 1.0, 0.0), data), Error);
    EXPECT_THROW(build_system(br, config(Scheme::ScottVogelius, 1.0, 1.0, 0.0), data), Error);
}

TEST(Kkt, SolutionContract)
{
    for (ExampleId ex : {ExampleId::Ex1, ExampleId::Ex2})
        for (Scheme s : kAllSchemes) {
            const Discretization d = disc_for(10, ex, s);
            const SchemeConfig cfg = config(s, 1e-3, 1e-3, 1e-2, ex);
            const SolutionFields f = solve_control_problem(d, cfg, example_data(ex, 1e-3, 1e-2));
            EXPECT_LE(f.relative_residual, 1e-10);
            const Vector m = pressure_integrals(*d.pressure);
            EXPECT_LE(std::abs(m.dot(f.p)), 1e-12 * std::max(1.0, f.p.norm()));
            EXPECT_LE(std::abs(m.dot(f.lambda)), 1e-12 * std::max(1.0, f.lambda.norm()));
            for (int b : d.velocity->boundary_dofs()) {
                EXPECT_EQ(f.u[b], 0.0);
                EXPECT_EQ(f.z[b], 0.0);
            }
            const SparseMatrix b = assemble_divergence(*d.velocity, *d.pressure);
            EXPECT_LE((b * f.u).cwiseAbs().maxCoeff(), 1e-10 * std::max(1e-10, f.u.cwiseAbs().maxCoeff()));
            EXPECT_LE((b * f.z).cwiseAbs().maxCoeff(), 1e-10 * std::max(1e-10, f.z.cwiseAbs().maxCoeff()));
        }
}

TEST(Kkt, ControlRecovery)
{
    const ExampleData data = example_data(ExampleId::Ex1, 1.0, 0.0);
    const double alpha = 1e-3;
    for (Scheme s : kAllSchemes) {
        const Discretization d = disc_for(8, ExampleId::Ex1, s);
        const SolutionFields f = solve_control_problem(d, config(s, 1.0, alpha, 0.0), data);
        const FESpace& target = s == Scheme::Classical || s == Scheme::ScottVogelius ? *d.velocity : d.recon->target();
        EXPECT_EQ(f.control_space.get(), &target);
        const Vector pz = &target == d.velocity.get() ? f.z : d.recon->apply(f.z);
        EXPECT_NEAR(l2_norm(*f.control_space, f.q), l2_norm(target, pz) / std::sqrt(alpha),
                    1e-13 * l2_norm(*f.control_space, f.q));
        SolutionFields zero = f;
        zero.z.setZero();
        recover_control(zero, d, config(s, 1.0, alpha, 0.0));
        EXPECT_EQ(zero.q.cwiseAbs().maxCoeff(), 0.0);
    }
}

TEST(Kkt, LargeAlphaSuppressesControl)
{
    const ExampleData data = example_data(ExampleId::Ex1, 1.0, 0.0);
    const Discretization d = disc_for(10, ExampleId::Ex1, Scheme::FullRobust);
    const SolutionFields f = solve_control_problem(d, config(Scheme::FullRobust, 1.0, 1e6, 0.0), data);
    const double ud = l2_norm(*d.velocity, interpolate(*d.velocity, data.ud));
    EXPECT_LE(l2_norm(*f.control_space, f.q), 1e-2 * ud);
}

TEST(Kkt, RhsScalingScalesSolution)
{
    const Discretization d = disc_for(10, ExampleId::Ex2, Scheme::PartialRobust);
    const KktSystem sys = build_system(d, config(Scheme::PartialRobust, 1e-3, 1e-4, 1e-4, ExampleId::Ex2),
                                       example_data(ExampleId::Ex2, 1e-3, 1e-4));
    const KktFactorization fac(sys);
    const SolutionFields a = fac.solve(sys.rhs);
    const SolutionFields b = fac.solve(-3.5 * sys.rhs);
    EXPECT_LE(rel_diff(b.u, -3.5 * a.u), 1e-12);
    EXPECT_LE(rel_diff(b.z, -3.5 * a.z), 1e-12);
    EXPECT_LE(rel_diff(b.p, -3.5 * a.p), 1e-12);
}

TEST(Kkt, FactorizationReuseMatchesFreshBuild)
{
    for (Scheme s : {Scheme::Classical, Scheme::FullRobust}) {
        const Discretization d = disc_for(8, ExampleId::Ex1, s);
        const KktSystem sys0 = build_system(d, config(s, 1e-3, 1e-3, 0.0), example_data(ExampleId::Ex1, 1e-3, 0.0));
        const ExampleData data1 = example_data(ExampleId::Ex1, 1e-3, 0.5);
        const SolutionFields reused = KktFactorization(sys0).solve(build_rhs(sys0, d, data1));
        const SolutionFields fresh = solve(build_system(d, config(s, 1e-3, 1e-3, 0.5), data1));
        EXPECT_LE(rel_diff(reused.u, fresh.u), 1e-12);
        EXPECT_LE(rel_diff(reused.z, fresh.z), 1e-12);
    }
}

TEST(Kkt, SingularMatrixNamesBlock)
{
    const Discretization d = disc_for(4, ExampleId::Ex1, Scheme::Classical);
    const KktSystem sys = build_system(d, config(Scheme::Classical, 1.0, 1.0, 0.0),
                                       example_data(ExampleId::Ex1, 1.0, 0.0));
    // a pressure unknown decoupled from everything: structurally singular
    SparseMatrix m = sys.matrix;
    const int dead = sys.layout.p() + 3;
    m.prune([dead](Eigen::Index r, Eigen::Index c, double) { return r != dead && c != dead; });
    try {
        solve_sparse(m, sys.rhs, 1e-10, [&](int i) { return sys.layout.block_name(i); });
        FAIL() << "singular system accepted";
    } catch (const SolverError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("singular"), std::string::npos) << msg;
        EXPECT_NE(msg.find("block p"), std::string::npos) << msg;
    }
}

TEST(Kkt, ForwardStokes)
{
    const VectorField poly = [](const Vec2& x) { return Vec2(x.x() * x.y(), 1.0 - x.x() * x.x()); };
    for (Scheme s : {Scheme::Classical, Scheme::ScottVogelius}) {
        const Discretization d = disc_for(10, ExampleId::Ex1, s);
        const StokesSolution r = solve_forward_stokes(d, 1.0, poly, TestMode::Id);
        EXPECT_LE(r.relative_residual, 1e-10);
        const StokesSolution zero = solve_forward_stokes(d, 1.0, kZero, TestMode::Id);
        EXPECT_EQ(zero.u.cwiseAbs().maxCoeff(), 0.0);
        EXPECT_EQ(zero.p.cwiseAbs().maxCoeff(), 0.0);
    }
}

TEST(Kkt, GradientForcePollutesOnlyClassicalVelocity)
{
    std::vector<double> classical;
    for (int n : {10, 20}) {
        const Discretization d = disc_for(n, ExampleId::Ex1, Scheme::FullRobust);
        const StokesSolution id = solve_forward_stokes(d, 1.0, kGradientForce, TestMode::Id);
        const StokesSolution pi = solve_forward_stokes(d, 1.0, kGradientForce, TestMode::Pi);
        classical.push_back(h1_seminorm(*d.velocity, id.u));
        EXPECT_LE(h1_seminorm(*d.velocity, pi.u), 1e-9);
        const Discretization sv = disc_for(n, ExampleId::Ex1, Scheme::ScottVogelius);
        EXPECT_LE(h1_seminorm(*sv.velocity, solve_forward_stokes(sv, 1.0, kGradientForce, TestMode::Id).u), 1e-9);
    }
    EXPECT_GT(classical[0], 0.0);
    EXPECT_NEAR(*eoc(classical)[0], 1.0, 0.3);
}

TEST(Kkt, SchemesCoincideWithIdentityReconstruction)
{
    BuildOptions opts;
    opts.identity_reconstruction = true;
    for (ExampleId ex : {ExampleId::Ex1, ExampleId::Ex2}) {
        const ExampleData data = example_data(ex, 1e-3, 1e-2);
        std::vector<SolutionFields> sols;
        for (Scheme s : {Scheme::Classical, Scheme::PartialRobust, Scheme::FullRobust})
            sols.push_back(solve(build_system(disc_for(10, ex, s), config(s, 1e-3, 1e-3, 1e-2, ex), data, opts)));
        for (std::size_t k = 1; k < sols.size(); ++k) {
            EXPECT_LE(rel_diff(sols[k].u, sols[0].u), 1e-12);
            EXPECT_LE(rel_diff(sols[k].z, sols[0].z), 1e-12);
            EXPECT_LE(rel_diff(sols[k].p, sols[0].p), 1e-12);
            EXPECT_LE(rel_diff(sols[k].lambda, sols[0].lambda), 1e-12);
        }
    }
}

TEST(Kkt, SolutionIsAffineInEps)
{
    for (Scheme s : kAllSchemes) {
        const Discretization d = disc_for(6, ExampleId::Ex1, s);
        const KktSystem sys = build_system(d, config(s, 1e-3, 1e-3, 0.0), example_data(ExampleId::Ex1, 1e-3, 0.0));
        const KktFactorization fac(sys);
        auto at = [&](double eps) {
            const SolutionFields f = fac.solve(build_rhs(sys, d, example_data(ExampleId::Ex1, 1e-3, eps)));
            Vector v(2 * f.u.size() + 2 * f.p.size());
            v << f.u, f.p, f.z, f.lambda;
            return v;
        };
        const Vector s0 = at(0.0), s1 = at(1.0), se = at(1e-4);
        EXPECT_LE(((se - s0) - 1e-4 * (s1 - s0)).norm(), 1e-9 * (s1 - s0).norm());
    }
}

TEST(Kkt, ClassicalDependsOnEpsRobustDoesNot)
{
    const ExampleData d0 = example_data(ExampleId::Ex1, 1e-3, 0.0);
    const ExampleData d1 = example_data(ExampleId::Ex1, 1e-3, 1.0);
    for (Scheme s : kAllSchemes) {
        const Discretization d = disc_for(10, ExampleId::Ex1, s);
        const SolutionFields a = solve_control_problem(d, config(s, 1e-3, 1e-3, 0.0), d0);
        const SolutionFields b = solve_control_problem(d, config(s, 1e-3, 1e-3, 1.0), d1);
        const double dz = rel_diff(b.z, a.z);
        if (s == Scheme::Classical || s == Scheme::PartialRobust)
            EXPECT_GE(dz, 1e-3) << to_string(s);
        else
            EXPECT_LE(dz, 1e-6) << to_string(s);  // the 1e-8 bound is checked by the acceptance suite
    }
}

TEST(Kkt, ControlConvergesForModerateAlpha)
{
    const ExampleData data = example_data(ExampleId::Ex1, 1.0, 0.0);
    const ReferenceKey key{ExampleId::Ex1, 1.0, 1e-1, 80};
    const ReferenceSolution ref = compute_reference(key);
    std::vector<double> q;
    for (int n : {10, 20}) {
        const Discretization d = disc_for(n, ExampleId::Ex1, Scheme::FullRobust);
        const SolutionFields f = solve_control_problem(d, config(Scheme::FullRobust, 1.0, 1e-1, 0.0), data);
        q.push_back(compute_errors(d, f, ref, Region::Whole).q_l2);
    }
    EXPECT_LT(q[1], q[0]);
    EXPECT_GE(*eoc(q)[0], 0.8);
}
