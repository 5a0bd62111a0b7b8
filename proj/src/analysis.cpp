#include "prc/analysis.hpp"

#include "prc/quadrature.hpp"

#include <Eigen/LU>

#include <array>
#include <cmath>
#include <cstdio>
#include <random>

namespace prc {

namespace {

/// Sums per-element contributions in element order regardless of `exec`.
template <int N, class Kernel>
std::array<double, N> sum_over_elements(int num_elements, Exec exec, Kernel&& kernel)
{
    std::vector<std::array<double, N>> part(static_cast<std::size_t>(num_elements));
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
        for (int t = 0; t < num_elements; ++t) part[t] = kernel(t);
    } else {
        for (int t = 0; t < num_elements; ++t) part[t] = kernel(t);
    }
    std::array<double, N> total{};
    for (const auto& p : part)
        for (int i = 0; i < N; ++i) total[i] += p[i];
    return total;
}

struct Sample {
    Vec2 value = Vec2::Zero();
    Mat2 grad = Mat2::Zero();
};

Sample combine(const BasisValues& bv, std::span<const int> dofs, const Vector& c)
{
    Sample s;
    for (int k = 0; k < bv.n; ++k) {
        s.value += c[dofs[k]] * bv.value[k];
        s.grad += c[dofs[k]] * bv.grad[k];
    }
    return s;
}

template <class F>
void for_each_quadrature_point(const Triangulation& mesh, int t, int degree, F&& f)
{
    const ElementGeometry geo = ElementGeometry::of(mesh, t);
    const QuadratureRule& rule = triangle_rule(degree);
    for (std::size_t q = 0; q < rule.size(); ++q) f(geo, rule.points[q], geo.map(rule.points[q]), rule.weights[q] * geo.det);
}

void require_vector_space(const FESpace& space, const char* what)
{
    PRC_REQUIRE(is_vector_family(space.family()), std::string(what) + ": needs a vector-valued space");
}

}  // namespace

AnalyticReference::AnalyticReference(VectorField u, GradientField grad_u, VectorField z, GradientField grad_z,
                                     VectorField q)
    : u_(std::move(u)), z_(std::move(z)), q_(std::move(q)), grad_u_(std::move(grad_u)), grad_z_(std::move(grad_z))
{
}

ReferenceValue AnalyticReference::at(const Vec2& x) const
{
    ReferenceValue r;
    if (u_) r.u = u_(x);
    if (grad_u_) r.grad_u = grad_u_(x);
    if (z_) r.z = z_(x);
    if (grad_z_) r.grad_z = grad_z_(x);
    if (q_) r.q = q_(x);
    return r;
}

AnalyticReference example2_solution(const ExampleData& data)
{
    return AnalyticReference(data.u, data.grad_u);
}

std::string ReferenceKey::name() const
{
    char buf[96];
    std::snprintf(buf, sizeof buf, "ex%d_nu%.0e_alpha%.0e_n%d", static_cast<int>(example), nu, alpha, n);
    return buf;
}

ReferenceSolution::ReferenceSolution(ReferenceKey key, StreamSpacePtr space, Vector psi_u, Vector psi_z)
    : key_(key), space_(std::move(space)), psi_u_(std::move(psi_u)), psi_z_(std::move(psi_z)),
      locator_(space_->mesh_ptr())
{
    PRC_REQUIRE(psi_u_.size() == space_->num_dofs() && psi_z_.size() == space_->num_dofs(),
                "reference solution: coefficient length mismatch");
    PRC_REQUIRE(key_.alpha > 0.0, "reference solution: alpha must be positive");
}

ReferenceValue ReferenceSolution::at(const Vec2& x) const
{
    const PointLocation loc = locator_.locate(x);
    CloughTocherSpace::Values v;
    space_->eval(loc.triangle, CloughTocherSpace::sub_triangle_of(loc.bary), x, v);
    const auto dofs = space_->element_dofs(loc.triangle);
    StreamValue su, sz;
    for (int j = 0; j < 12; ++j) {
        su.grad += psi_u_[dofs[j]] * v.grad[j];
        su.hess += psi_u_[dofs[j]] * v.hess[j];
        sz.grad += psi_z_[dofs[j]] * v.grad[j];
        sz.hess += psi_z_[dofs[j]] * v.hess[j];
    }
    ReferenceValue r;
    r.u = su.velocity();
    r.grad_u = su.velocity_gradient();
    r.z = sz.velocity();
    r.grad_z = sz.velocity_gradient();
    r.q = -r.z / std::sqrt(key_.alpha);
    return r;
}

ReferenceSolution compute_reference(const ReferenceKey& key, double tolerance, Exec exec)
{
    SchemeConfig cfg;
    cfg.scheme = Scheme::ScottVogelius;
    cfg.nu = key.nu;
    cfg.alpha = key.alpha;
    cfg.eps = 0.0;
    cfg.example = key.example;
    const RegionTagging tagging = key.example == ExampleId::Ex2 ? RegionTagging::ThreeStrips : RegionTagging::None;
    auto macro = std::make_shared<const Triangulation>(build_unit_square(key.n, tagging));
    StreamSolution s =
        solve_stream_control_problem(macro, cfg, example_data(key.example, key.nu, 0.0), tolerance, exec);
    return ReferenceSolution(key, s.space, std::move(s.psi_u), std::move(s.psi_z));
}

ErrorReport compute_errors(const Discretization& disc, const SolutionFields& fields, const ReferenceField& reference,
                           Region control_region, int degree, Exec exec)
{
    const FESpace& V = *disc.velocity;
    PRC_REQUIRE(fields.u.size() == V.num_dofs() && fields.z.size() == V.num_dofs(),
                "compute_errors: solution does not match the discretization");
    PRC_REQUIRE(fields.control_space != nullptr && fields.q.size() == fields.control_space->num_dofs(),
                "compute_errors: control missing (call recover_control)");
    PRC_REQUIRE(&fields.control_space->mesh() == &V.mesh(), "compute_errors: control lives on another mesh");
    const FESpace& C = *fields.control_space;
    const Triangulation& mesh = V.mesh();

    // u_h1, u_l2, z_h1, z_l2, q_l2 (squared)
    const auto sums = sum_over_elements<5>(mesh.num_triangles(), exec, [&](int t) {
        std::array<double, 5> acc{};
        const bool control = mesh.in_region(t, control_region);
        BasisValues bv, bc;
        for_each_quadrature_point(mesh, t, degree, [&](const ElementGeometry& geo, const Barycentric& b,
                                                       const Vec2& x, double w) {
            V.eval(geo, t, b, bv);
            const Sample u = combine(bv, V.element_dofs(t), fields.u);
            const Sample z = combine(bv, V.element_dofs(t), fields.z);
            const ReferenceValue r = reference.at(x);
            acc[0] += w * (r.grad_u - u.grad).squaredNorm();
            acc[1] += w * (r.u - u.value).squaredNorm();
            acc[2] += w * (r.grad_z - z.grad).squaredNorm();
            acc[3] += w * (r.z - z.value).squaredNorm();
            if (control) {
                C.eval(geo, t, b, bc);
                const Sample q = combine(bc, C.element_dofs(t), fields.q);
                acc[4] += w * (r.q - q.value).squaredNorm();
            }
        });
        return acc;
    });

    ErrorReport rep;
    rep.h = mesh.max_edge_length();
    rep.velocity_dofs = V.num_dofs();
    rep.pressure_dofs = disc.pressure ? disc.pressure->num_dofs() : 0;
    rep.u_h1 = std::sqrt(sums[0]);
    rep.u_l2 = std::sqrt(sums[1]);
    rep.z_h1 = std::sqrt(sums[2]);
    rep.z_l2 = std::sqrt(sums[3]);
    rep.q_l2 = std::sqrt(sums[4]);
    rep.energy = std::sqrt(sums[0] + sums[2]);
    return rep;
}

std::vector<std::optional<double>> eoc(const std::vector<double>& errors, const std::vector<double>& h)
{
    PRC_REQUIRE(errors.size() == h.size(), "eoc: errors and mesh sizes differ in length");
    std::vector<std::optional<double>> rates;
    for (std::size_t i = 0; i + 1 < errors.size(); ++i) {
        const double e0 = errors[i], e1 = errors[i + 1];
        if (e0 > 0.0 && e1 > 0.0 && std::isfinite(e0) && std::isfinite(e1) && h[i] > h[i + 1] && h[i + 1] > 0.0)
            rates.emplace_back(std::log(e0 / e1) / std::log(h[i] / h[i + 1]));
        else
            rates.emplace_back(std::nullopt);
    }
    return rates;
}

std::vector<std::optional<double>> eoc(const std::vector<double>& errors)
{
    std::vector<double> h(errors.size());
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = std::ldexp(1.0, -static_cast<int>(i));
    return eoc(errors, h);
}

void fill_eoc(std::vector<ErrorReport>& levels)
{
    std::vector<double> h, energy, ul2, q;
    for (const auto& l : levels) {
        h.push_back(l.h);
        energy.push_back(l.energy);
        ul2.push_back(l.u_l2);
        q.push_back(l.q_l2);
    }
    const auto re = eoc(energy, h), ru = eoc(ul2, h), rq = eoc(q, h);
    for (std::size_t i = 0; i < levels.size(); ++i) {
        levels[i].eoc_energy = i == 0 ? std::nullopt : re[i - 1];
        levels[i].eoc_u_l2 = i == 0 ? std::nullopt : ru[i - 1];
        levels[i].eoc_q = i == 0 ? std::nullopt : rq[i - 1];
    }
}

double l2_error(const FESpace& space, const Vector& coeffs, const VectorField& exact, Region region, int degree,
                Exec exec)
{
    require_vector_space(space, "l2_error");
    PRC_REQUIRE(coeffs.size() == space.num_dofs(), "l2_error: coefficient length mismatch");
    const Triangulation& mesh = space.mesh();
    const auto s = sum_over_elements<1>(mesh.num_triangles(), exec, [&](int t) {
        std::array<double, 1> acc{};
        if (!mesh.in_region(t, region)) return acc;
        BasisValues bv;
        for_each_quadrature_point(mesh, t, degree, [&](const ElementGeometry& geo, const Barycentric& b,
                                                       const Vec2& x, double w) {
            space.eval(geo, t, b, bv);
            const Vec2 v = combine(bv, space.element_dofs(t), coeffs).value;
            acc[0] += w * (exact ? Vec2(exact(x) - v) : Vec2(-v)).squaredNorm();
        });
        return acc;
    });
    return std::sqrt(s[0]);
}

double h1_error(const FESpace& space, const Vector& coeffs, const GradientField& exact, int degree, Exec exec)
{
    require_vector_space(space, "h1_error");
    PRC_REQUIRE(coeffs.size() == space.num_dofs(), "h1_error: coefficient length mismatch");
    const Triangulation& mesh = space.mesh();
    const auto s = sum_over_elements<1>(mesh.num_triangles(), exec, [&](int t) {
        std::array<double, 1> acc{};
        BasisValues bv;
        for_each_quadrature_point(mesh, t, degree, [&](const ElementGeometry& geo, const Barycentric& b,
                                                       const Vec2& x, double w) {
            space.eval(geo, t, b, bv);
            const Mat2 g = combine(bv, space.element_dofs(t), coeffs).grad;
            acc[0] += w * (exact ? Mat2(exact(x) - g) : Mat2(-g)).squaredNorm();
        });
        return acc;
    });
    return std::sqrt(s[0]);
}

double l2_norm(const FESpace& space, const Vector& coeffs, Region region, int degree, Exec exec)
{
    return l2_error(space, coeffs, VectorField{}, region, degree, exec);
}

double h1_seminorm(const FESpace& space, const Vector& coeffs, int degree, Exec exec)
{
    return h1_error(space, coeffs, GradientField{}, degree, exec);
}

double l2_distance(const FESpace& a, const Vector& ca, const FESpace& b, const Vector& cb, int degree, Exec exec)
{
    require_vector_space(a, "l2_distance");
    require_vector_space(b, "l2_distance");
    PRC_REQUIRE(&a.mesh() == &b.mesh(), "l2_distance: spaces live on different meshes");
    PRC_REQUIRE(ca.size() == a.num_dofs() && cb.size() == b.num_dofs(), "l2_distance: coefficient length mismatch");
    const Triangulation& mesh = a.mesh();
    const auto s = sum_over_elements<1>(mesh.num_triangles(), exec, [&](int t) {
        std::array<double, 1> acc{};
        BasisValues va, vb;
        for_each_quadrature_point(mesh, t, degree, [&](const ElementGeometry& geo, const Barycentric& bar,
                                                       const Vec2&, double w) {
            a.eval(geo, t, bar, va);
            b.eval(geo, t, bar, vb);
            acc[0] += w * (combine(va, a.element_dofs(t), ca).value - combine(vb, b.element_dofs(t), cb).value)
                              .squaredNorm();
        });
        return acc;
    });
    return std::sqrt(s[0]);
}

CoeffVector stokes_projector(const Discretization& disc, const GradientField& grad_w, double tolerance, Exec exec)
{
    const Vector rhs = assemble_gradient_load(*disc.velocity, grad_w, data_options(exec));
    return {disc.velocity, solve_stokes(disc, 1.0, rhs, tolerance, exec).u};
}

double dual_norm_gradient(const Discretization& disc, const ScalarField& psi, double tolerance, Exec exec)
{
    const Vector rhs = assemble_divergence_load(*disc.velocity, psi, data_options(exec));
    const Vector w = solve_stokes(disc, 1.0, rhs, tolerance, exec).u;
    return h1_seminorm(*disc.velocity, w, 8, exec);
}

double pressure_projection_error(const FESpace& pressure, const ScalarField& psi, int degree)
{
    PRC_REQUIRE(pressure.family() == Family::P0_pressure || pressure.family() == Family::P1disc_pressure,
                "pressure_projection_error: needs a discontinuous pressure space");
    const Triangulation& mesh = pressure.mesh();
    const QuadratureRule& rule = triangle_rule(degree);
    double total = 0.0;
    BasisValues bv;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const ElementGeometry geo = ElementGeometry::of(mesh, t);
        const int n = pressure.local_size();
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
        Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
        std::vector<double> values(rule.size());
        for (std::size_t q = 0; q < rule.size(); ++q) {
            pressure.eval(geo, t, rule.points[q], bv);
            const double w = rule.weights[q] * geo.det;
            values[q] = psi(geo.map(rule.points[q]));
            for (int i = 0; i < n; ++i) {
                f[i] += w * values[q] * bv.scalar[i];
                for (int j = 0; j < n; ++j) m(i, j) += w * bv.scalar[i] * bv.scalar[j];
            }
        }
        const Eigen::VectorXd c = m.partialPivLu().solve(f);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            pressure.eval(geo, t, rule.points[q], bv);
            double p = 0.0;
            for (int i = 0; i < n; ++i) p += c[i] * bv.scalar[i];
            total += rule.weights[q] * geo.det * (values[q] - p) * (values[q] - p);
        }
    }
    return std::sqrt(total);
}

PythagorasSplit pythagoras_split(const FESpace& velocity, const Vector& u_h, const Vector& s_h_u,
                                 const GradientField& grad_u, int degree, Exec exec)
{
    PythagorasSplit s;
    s.total = std::pow(h1_error(velocity, u_h, grad_u, degree, exec), 2);
    s.approximation = std::pow(h1_error(velocity, s_h_u, grad_u, degree, exec), 2);
    s.discrete = std::pow(h1_seminorm(velocity, Vector(s_h_u - u_h), degree, exec), 2);
    return s;
}

double reconstruction_ratio(const Discretization& disc, int iterations, Exec exec)
{
    PRC_REQUIRE(disc.recon != nullptr, "reconstruction_ratio: scheme has no reconstruction");
    PRC_REQUIRE(iterations > 0, "reconstruction_ratio: iterations must be positive");
    const FESpace& V = *disc.velocity;
    const ReconstructionOperator* r = disc.reconstruction();
    const AssemblyOptions form{exec, 8, 1.0};
    // Mass form of v - Pi v.
    const SparseMatrix m = assemble_mass(V, MassMode::IdId, Region::Whole, r, form) -
                           assemble_mass(V, MassMode::IdPi, Region::Whole, r, form) -
                           assemble_mass(V, MassMode::PiId, Region::Whole, r, form) +
                           assemble_mass(V, MassMode::PiPi, Region::Whole, r, form);
    const SparseMatrix a = assemble_vector_laplacian(V, form);
    const StokesFactorization stokes(disc, 1.0, 1e-10, exec);

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Vector x(V.num_dofs());
    for (int i = 0; i < x.size(); ++i) x[i] = uni(rng);
    x = stokes.solve(x).u;
    double rayleigh = 0.0;
    for (int it = 0; it < iterations; ++it) {
        x = stokes.solve(m * x).u;
        x /= std::sqrt(x.dot(a * x));
        rayleigh = x.dot(m * x);
    }
    return std::sqrt(rayleigh);
}

}  // namespace prc
