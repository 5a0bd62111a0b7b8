#include "prc/problem.hpp"

#include <cmath>

namespace prc {

std::string to_string(Scheme s)
{
    switch (s) {
    case Scheme::Classical: return "Classical";
    case Scheme::PartialRobust: return "PartialRobust";
    case Scheme::FullRobust: return "FullRobust";
    case Scheme::ScottVogelius: return "ScottVogelius";
    }
    return "?";
}

Scheme scheme_from_string(const std::string& s)
{
    for (Scheme v : {Scheme::Classical, Scheme::PartialRobust, Scheme::FullRobust, Scheme::ScottVogelius})
        if (to_string(v) == s) return v;
    throw Error("unknown scheme '" + s + "'");
}

void validate(const SchemeConfig& cfg)
{
    PRC_REQUIRE(cfg.alpha > 0.0, "scheme config: alpha must be positive");
    PRC_REQUIRE(cfg.nu > 0.0, "scheme config: nu must be positive");
    PRC_REQUIRE(cfg.tolerance > 0.0, "scheme config: tolerance must be positive");
}

TestMode observation_mode(Scheme s)
{
    return s == Scheme::FullRobust ? TestMode::Pi : TestMode::Id;
}

TestMode state_mode(Scheme s)
{
    return (s == Scheme::FullRobust || s == Scheme::PartialRobust) ? TestMode::Pi : TestMode::Id;
}

double stream_factor(double s, int derivative)
{
    // a(s) = g^4 with g = s^2 - s, g' = 2s - 1, g'' = 2
    const double g = s * s - s;
    const double dg = 2.0 * s - 1.0;
    switch (derivative) {
    case 0: return g * g * g * g;
    case 1: return 4.0 * g * g * g * dg;
    case 2: return 12.0 * g * g * dg * dg + 8.0 * g * g * g;
    case 3: return 24.0 * g * dg * dg * dg + 72.0 * g * g * dg;
    case 4: return 24.0 * dg * dg * dg * dg + 288.0 * g * dg * dg + 144.0 * g * g;
    default: throw Error("stream_factor: derivative order out of range");
    }
}

ExampleData example_data(ExampleId id, double nu, double eps)
{
    ExampleData d;
    auto a = [](double s, int k) { return stream_factor(s, k); };
    d.u = [a](const Vec2& p) { return Vec2(a(p.x(), 0) * a(p.y(), 1), -a(p.x(), 1) * a(p.y(), 0)); };
    d.grad_u = [a](const Vec2& p) {
        Mat2 g;
        g << a(p.x(), 1) * a(p.y(), 1), a(p.x(), 0) * a(p.y(), 2), -a(p.x(), 2) * a(p.y(), 0),
            -a(p.x(), 1) * a(p.y(), 1);
        return g;
    };
    d.laplace_u = [a](const Vec2& p) {
        const double x = p.x(), y = p.y();
        return Vec2(a(x, 2) * a(y, 1) + a(x, 0) * a(y, 3), -(a(x, 3) * a(y, 0) + a(x, 1) * a(y, 2)));
    };

    if (id == ExampleId::Ex1) {
        d.f = [](const Vec2&) { return Vec2(0.0, 0.0); };
        d.perturbation_potential = [](const Vec2& p) { return std::cos(p.x()) * std::sin(p.y()); };
        d.perturbation = [](const Vec2& p) {
            return Vec2(-std::sin(p.x()) * std::sin(p.y()), std::cos(p.x()) * std::cos(p.y()));
        };
    } else {
        auto lap = d.laplace_u;
        d.f = [lap, nu](const Vec2& p) { return Vec2(-nu * lap(p)); };
        d.perturbation_potential = [](const Vec2& p) { return std::sin(p.x() - 0.6) * std::cos(p.y()); };
        d.perturbation = [](const Vec2& p) {
            return Vec2(std::cos(p.x() - 0.6) * std::cos(p.y()), -std::sin(p.x() - 0.6) * std::sin(p.y()));
        };
        d.control_region = Region::C;
        d.observation_region = Region::O;
    }
    auto u = d.u;
    auto pert = d.perturbation;
    d.ud = [u, pert, eps](const Vec2& p) { return Vec2(u(p) + eps * pert(p)); };
    return d;
}

Discretization make_discretization(MeshPtr mesh, Scheme scheme, Exec exec)
{
    PRC_REQUIRE(mesh != nullptr, "make_discretization: null mesh");
    Discretization d;
    d.scheme = scheme;
    d.mesh = mesh;
    if (scheme == Scheme::ScottVogelius) {
        PRC_REQUIRE(mesh->barycentric(),
                    "make_discretization: the Scott-Vogelius pair needs a barycentrically refined mesh");
        d.velocity = build_space(mesh, Family::P2_velocity);
        d.pressure = build_space(mesh, Family::P1disc_pressure);
    } else {
        d.velocity = build_space(mesh, Family::BR_velocity);
        d.pressure = build_space(mesh, Family::P0_pressure);
        d.recon = std::make_shared<const ReconstructionOperator>(d.velocity, build_space(mesh, Family::BDM1), exec);
    }
    return d;
}

MeshPtr scheme_mesh(int n, ExampleId example, Scheme scheme)
{
    const RegionTagging tagging = example == ExampleId::Ex2 ? RegionTagging::ThreeStrips : RegionTagging::None;
    Triangulation mesh = build_unit_square(n, tagging);
    if (scheme == Scheme::ScottVogelius) mesh = refine_barycentric(mesh);
    return std::make_shared<const Triangulation>(std::move(mesh));
}

}  // namespace prc
