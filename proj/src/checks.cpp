#include "prc/checks.hpp"

#include "prc/analysis.hpp"
#include "prc/assembly.hpp"
#include "prc/kkt.hpp"
#include "prc/quadrature.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

namespace prc {

namespace {

std::string sci(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

std::string rate(const std::optional<double>& r)
{
    if (!r) return "-";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", *r);
    return buf;
}

bool rate_within(const std::optional<double>& r, double lo, double hi) { return r && *r >= lo && *r <= hi; }

double relative_difference(const Vector& a, const Vector& b)
{
    const double scale = std::max(a.norm(), b.norm());
    return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

Vector stacked(const SolutionFields& f)
{
    Vector x(f.u.size() + f.p.size() + f.z.size() + f.lambda.size());
    x << f.u, f.p, f.z, f.lambda;
    return x;
}

SchemeConfig scheme_config(Scheme s, ExampleId ex, double nu, double alpha, double eps)
{
    SchemeConfig c;
    c.scheme = s;
    c.example = ex;
    c.nu = nu;
    c.alpha = alpha;
    c.eps = eps;
    return c;
}

const Scheme kAllSchemes[] = {Scheme::Classical, Scheme::PartialRobust, Scheme::FullRobust, Scheme::ScottVogelius};

}  // namespace

CheckResult check_gradient_force(const std::vector<int>& levels, double max_seconds)
{
    CheckResult r{"gradient force invisibility", true, ""};
    const VectorField f = [](const Vec2& p) {
        return Vec2(-std::sin(p.x()) * std::sin(p.y()), std::cos(p.x()) * std::cos(p.y()));
    };
    std::ostringstream d;
    std::vector<double> classical;
    double worst_robust = 0.0, slowest = 0.0;
    for (int n : levels) {
        const auto t0 = std::chrono::steady_clock::now();
        const Discretization br = make_discretization(scheme_mesh(n, ExampleId::Ex1, Scheme::Classical), Scheme::Classical);
        const Discretization sv =
            make_discretization(scheme_mesh(n, ExampleId::Ex1, Scheme::ScottVogelius), Scheme::ScottVogelius);
        const double c = h1_seminorm(*br.velocity, solve_forward_stokes(br, 1.0, f, TestMode::Id).u);
        const double p = h1_seminorm(*br.velocity, solve_forward_stokes(br, 1.0, f, TestMode::Pi).u);
        const double s = h1_seminorm(*sv.velocity, solve_forward_stokes(sv, 1.0, f, TestMode::Id).u);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        classical.push_back(c);
        worst_robust = std::max({worst_robust, p, s});
        slowest = std::max(slowest, secs);
        d << "n=" << n << " classical " << sci(c) << " reconstructed " << sci(p) << " scott-vogelius " << sci(s)
          << " (" << sci(secs) << " s); ";
    }
    const auto rates = eoc(classical);
    for (const auto& q : rates) r.passed = r.passed && rate_within(q, 0.7, 1.3);
    r.passed = r.passed && worst_robust <= 1e-8 && !classical.empty() && classical.front() >= 1e-3 &&
               slowest < max_seconds;
    d << "classical eoc";
    for (const auto& q : rates) d << ' ' << rate(q);
    r.detail = d.str();
    return r;
}

CheckResult check_forward_exact(const std::vector<int>& levels, double nu)
{
    CheckResult r{"forward solve with exact velocity", true, ""};
    const ExampleData data = example_data(ExampleId::Ex2, nu, 0.0);
    std::ostringstream d;
    for (Scheme s : {Scheme::Classical, Scheme::FullRobust, Scheme::ScottVogelius}) {
        std::vector<double> err;
        for (int n : levels) {
            const Discretization disc = make_discretization(scheme_mesh(n, ExampleId::Ex1, s), s);
            const TestMode mode = state_mode(s);
            err.push_back(h1_error(*disc.velocity, solve_forward_stokes(disc, nu, data.f, mode).u, data.grad_u));
        }
        const auto rates = eoc(err);
        const double lo = s == Scheme::ScottVogelius ? 1.5 : 0.8;
        const double hi = s == Scheme::ScottVogelius ? 2.5 : 1.3;
        d << to_string(s) << " H1 error";
        for (double e : err) d << ' ' << sci(e);
        d << " eoc";
        for (const auto& q : rates) {
            d << ' ' << rate(q);
            r.passed = r.passed && rate_within(q, lo, hi);
        }
        d << "; ";
    }
    r.detail = d.str();
    return r;
}

CheckResult check_eps_invariance(int n, double nu, double alpha)
{
    CheckResult r{"eps invariance", true, ""};
    std::ostringstream d;
    for (Scheme s : {Scheme::FullRobust, Scheme::ScottVogelius, Scheme::Classical}) {
        const Discretization disc = make_discretization(scheme_mesh(n, ExampleId::Ex1, s), s);
        SolutionFields f0 =
            solve_control_problem(disc, scheme_config(s, ExampleId::Ex1, nu, alpha, 0.0), example_data(ExampleId::Ex1, nu, 0.0));
        SolutionFields f1 =
            solve_control_problem(disc, scheme_config(s, ExampleId::Ex1, nu, alpha, 1.0), example_data(ExampleId::Ex1, nu, 1.0));
        const double du = relative_difference(f0.u, f1.u);
        const double dz = relative_difference(f0.z, f1.z);
        const double dq = relative_difference(f0.q, f1.q);
        if (s == Scheme::Classical)
            r.passed = r.passed && dz >= 1e-3;
        else
            r.passed = r.passed && std::max({du, dz, dq}) <= 1e-8;
        d << to_string(s) << " rel. diff u " << sci(du) << " z " << sci(dz) << " q " << sci(dq) << "; ";
    }
    r.detail = d.str();
    return r;
}

CheckResult check_eps_linearity(int n, const std::vector<double>& nus, const std::vector<double>& alphas, double eps)
{
    CheckResult r{"eps linearity", true, ""};
    double worst = 0.0;
    int cases = 0;
    for (ExampleId ex : {ExampleId::Ex1, ExampleId::Ex2}) {
        for (Scheme s : kAllSchemes) {
            const Discretization disc = make_discretization(scheme_mesh(n, ex, s), s);
            for (double nu : nus) {
                for (double alpha : alphas) {
                    const KktSystem sys = build_system(disc, scheme_config(s, ex, nu, alpha, 0.0), example_data(ex, nu, 0.0));
                    const KktFactorization fact(sys);
                    auto sol = [&](double e) { return stacked(fact.solve(build_rhs(sys, disc, example_data(ex, nu, e)))); };
                    const Vector s0 = sol(0.0), se = sol(eps), s1 = sol(1.0);
                    const double ratio = ((se - s0) - eps * (s1 - s0)).norm() / (s1 - s0).norm();
                    worst = std::max(worst, std::isfinite(ratio) ? ratio : INFINITY);
                    ++cases;
                }
            }
        }
    }
    r.passed = worst <= 1e-9;
    r.detail = std::to_string(cases) + " cases, worst relative defect " + sci(worst);
    return r;
}

CheckResult check_scheme_equivalence(int n, double nu, double alpha)
{
    CheckResult r{"scheme equivalence without reconstruction", true, ""};
    BuildOptions opts;
    opts.identity_reconstruction = true;
    double worst = 0.0;
    for (ExampleId ex : {ExampleId::Ex1, ExampleId::Ex2}) {
        if (ex == ExampleId::Ex2 && n % 5 != 0) continue;
        const ExampleData data = example_data(ex, nu, 1e-4);
        Vector base;
        for (Scheme s : {Scheme::Classical, Scheme::PartialRobust, Scheme::FullRobust}) {
            const Discretization disc = make_discretization(scheme_mesh(n, ex, s), s);
            const Vector x = stacked(solve(build_system(disc, scheme_config(s, ex, nu, alpha, 1e-4), data, opts)));
            if (base.size() == 0)
                base = x;
            else
                worst = std::max(worst, relative_difference(base, x));
        }
    }
    r.passed = worst <= 1e-12;
    r.detail = "largest relative difference " + sci(worst);
    return r;
}

CheckResult check_projector_suite(const std::vector<int>& levels, int samples)
{
    CheckResult r{"projector and reconstruction", true, ""};
    const ExampleData data = example_data(ExampleId::Ex1, 1.0, 0.0);
    std::vector<double> proj_err, ratios;
    double worst_orth = 0.0, worst_div = 0.0;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int n : levels) {
        const Discretization disc =
            make_discretization(scheme_mesh(n, ExampleId::Ex1, Scheme::Classical), Scheme::Classical);
        const FESpace& V = *disc.velocity;
        const CoeffVector s = stokes_projector(disc, data.grad_u);
        proj_err.push_back(l2_error(V, s.values, data.u));
        ratios.push_back(reconstruction_ratio(disc));

        const SparseMatrix a = assemble_vector_laplacian(V);
        const Vector load = assemble_gradient_load(V, data.grad_u);
        const StokesFactorization stokes(disc, 1.0);
        const QuadratureRule& rule = triangle_rule(2);
        for (int k = 0; k < samples; ++k) {
            Vector g(V.num_dofs());
            for (int i = 0; i < g.size(); ++i) g[i] = uni(rng);
            Vector v = stokes.solve(g).u;
            v /= std::sqrt(v.dot(a * v));
            worst_orth = std::max(worst_orth, std::abs(v.dot(load - a * s.values)));
            const Vector pv = disc.recon->apply(v);
            for (int t = 0; t < V.mesh().num_triangles(); ++t)
                for (const auto& b : rule.points)
                    worst_div = std::max(worst_div, std::abs(evaluate(disc.recon->target(), pv, t, b).div));
        }
    }
    const auto rp = eoc(proj_err), rr = eoc(ratios);
    std::ostringstream d;
    d << "orthogonality residual " << sci(worst_orth) << "; |w - S_h w| eoc";
    for (const auto& q : rp) {
        d << ' ' << rate(q);
        r.passed = r.passed && rate_within(q, 1.7, 2.3);
    }
    d << "; worst |v - Pi v| / |grad v|";
    for (double x : ratios) d << ' ' << sci(x);
    d << " eoc";
    for (const auto& q : rr) {
        d << ' ' << rate(q);
        r.passed = r.passed && rate_within(q, 0.8, 1.2);
    }
    d << "; max |div Pi v| " << sci(worst_div);
    r.passed = r.passed && worst_orth <= 1e-9 && worst_div <= 1e-11;
    r.detail = d.str();
    return r;
}

CheckResult check_dual_norm(const std::vector<int>& levels)
{
    CheckResult r{"dual norm of a gradient", true, ""};
    const ScalarField psi = [](const Vec2& p) { return std::cos(p.x()) * std::sin(p.y()); };
    std::vector<double> br;
    double worst_sv = 0.0;
    std::ostringstream d;
    for (int n : levels) {
        const Discretization b = make_discretization(scheme_mesh(n, ExampleId::Ex1, Scheme::Classical), Scheme::Classical);
        const Discretization s =
            make_discretization(scheme_mesh(n, ExampleId::Ex1, Scheme::ScottVogelius), Scheme::ScottVogelius);
        const double value = dual_norm_gradient(b, psi);
        const double bound = pressure_projection_error(*b.pressure, psi);
        const double sv = dual_norm_gradient(s, psi);
        br.push_back(value);
        worst_sv = std::max(worst_sv, sv);
        r.passed = r.passed && value <= bound + 1e-9;
        d << "n=" << n << " BR " << sci(value) << " (bound " << sci(bound) << ") SV " << sci(sv) << "; ";
    }
    d << "BR eoc";
    for (const auto& q : eoc(br)) {
        d << ' ' << rate(q);
        r.passed = r.passed && rate_within(q, 0.7, 1.3);
    }
    r.passed = r.passed && worst_sv <= 1e-9;
    r.detail = d.str();
    return r;
}

std::string format_result(const CheckResult& r)
{
    return std::string(r.passed ? "PASS" : "FAIL") + "  " + r.name + ": " + r.detail;
}

}  // namespace prc
