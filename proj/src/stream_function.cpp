#include "prc/stream_function.hpp"

#include "prc/quadrature.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <string>

namespace prc {

namespace {

constexpr int kExponents[10][2] = {{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}, {3, 0}, {2, 1}, {1, 2}, {0, 3}};

double ipow(double x, int k)
{
    double r = 1.0;
    for (int i = 0; i < k; ++i) r *= x;
    return r;
}

// Cubic monomials in scaled coordinates xi = (x - center) / scale, with
// physical first and second derivatives.
struct Monomials {
    Eigen::Matrix<double, 10, 1> v, dx, dy, dxx, dxy, dyy;

    Monomials(const Vec2& x, const Vec2& center, double scale)
    {
        const double a = (x.x() - center.x()) / scale;
        const double b = (x.y() - center.y()) / scale;
        const double s1 = 1.0 / scale, s2 = s1 * s1;
        for (int m = 0; m < 10; ++m) {
            const int p = kExponents[m][0], q = kExponents[m][1];
            v[m] = ipow(a, p) * ipow(b, q);
            dx[m] = p > 0 ? p * ipow(a, p - 1) * ipow(b, q) * s1 : 0.0;
            dy[m] = q > 0 ? q * ipow(a, p) * ipow(b, q - 1) * s1 : 0.0;
            dxx[m] = p > 1 ? p * (p - 1) * ipow(a, p - 2) * ipow(b, q) * s2 : 0.0;
            dyy[m] = q > 1 ? q * (q - 1) * ipow(a, p) * ipow(b, q - 2) * s2 : 0.0;
            dxy[m] = (p > 0 && q > 0) ? p * q * ipow(a, p - 1) * ipow(b, q - 1) * s2 : 0.0;
        }
    }
};

Vec2 perp(const Vec2& d) { return Vec2(d.y(), -d.x()); }

}  // namespace

CloughTocherSpace::CloughTocherSpace(MeshPtr mesh) : mesh_(std::move(mesh))
{
    PRC_REQUIRE(mesh_ != nullptr, "CloughTocherSpace: null mesh");
    PRC_REQUIRE(!mesh_->barycentric(), "CloughTocherSpace: expects the macro mesh, not its barycentric split");
    const Triangulation& m = *mesh_;
    const int nv = m.num_vertices();
    const int nt = m.num_triangles();
    ndofs_ = 3 * nv + m.num_edges();

    coeffs_.resize(static_cast<std::size_t>(nt));
    centers_.resize(static_cast<std::size_t>(nt));
    scales_.resize(static_cast<std::size_t>(nt));
    for (int t = 0; t < nt; ++t) {
        const auto& tri = m.triangle(t);
        const std::array<Vec2, 3> a{m.vertex(tri[0]), m.vertex(tri[1]), m.vertex(tri[2])};
        const Vec2 g = (a[0] + a[1] + a[2]) / 3.0;
        const double h = std::max({(a[1] - a[0]).norm(), (a[2] - a[1]).norm(), (a[0] - a[2]).norm()});
        centers_[t] = g;
        scales_[t] = h;

        // C1 continuity across the three interior edges g -- a_j, shared by
        // sub-triangles j+1 and j+2.
        Eigen::Matrix<double, 21, 30> c = Eigen::Matrix<double, 21, 30>::Zero();
        int row = 0;
        for (int j = 0; j < 3; ++j) {
            const int l = (j + 1) % 3, r = (j + 2) % 3;
            const Vec2 d = a[j] - g;
            const Vec2 n = perp(d).normalized();
            for (double s : {0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0}) {
                const Monomials mono(g + s * d, g, h);
                c.block<1, 10>(row, 10 * l) = mono.v.transpose();
                c.block<1, 10>(row, 10 * r) = -mono.v.transpose();
                ++row;
            }
            for (double s : {0.0, 0.5, 1.0}) {
                const Monomials mono(g + s * d, g, h);
                const Eigen::Matrix<double, 10, 1> dn = n.x() * mono.dx + n.y() * mono.dy;
                c.block<1, 10>(row, 10 * l) = h * dn.transpose();
                c.block<1, 10>(row, 10 * r) = -h * dn.transpose();
                ++row;
            }
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(c), Eigen::ComputeFullV);
        const auto& sv = svd.singularValues();
        PRC_REQUIRE(sv[17] > 1e-8 * sv[0] && sv[18] < 1e-10 * sv[0],
                    "CloughTocherSpace: unexpected rank of the C1 constraints");
        const Eigen::Matrix<double, 30, 12> kernel = svd.matrixV().rightCols(12);

        // Dof functionals on the kernel.
        Eigen::Matrix<double, 12, 30> dofs = Eigen::Matrix<double, 12, 30>::Zero();
        for (int i = 0; i < 3; ++i) {
            const int k = (i + 1) % 3;
            const Monomials mono(a[i], g, h);
            dofs.block<1, 10>(3 * i, 10 * k) = mono.v.transpose();
            dofs.block<1, 10>(3 * i + 1, 10 * k) = mono.dx.transpose();
            dofs.block<1, 10>(3 * i + 2, 10 * k) = mono.dy.transpose();
        }
        for (int k = 0; k < 3; ++k) {
            const Vec2 mid = 0.5 * (a[(k + 1) % 3] + a[(k + 2) % 3]);
            const Vec2 n = m.edge_normal(m.triangle_edges(t)[k]);
            const Monomials mono(mid, g, h);
            dofs.block<1, 10>(9 + k, 10 * k) = (n.x() * mono.dx + n.y() * mono.dy).transpose();
        }
        const Eigen::Matrix<double, 12, 12> gram = dofs * kernel;
        Eigen::FullPivLU<Eigen::Matrix<double, 12, 12>> lu(gram);
        PRC_REQUIRE(lu.isInvertible(), "CloughTocherSpace: dof functionals are not unisolvent");
        coeffs_[t] = kernel * lu.inverse();
    }

    is_boundary_.assign(static_cast<std::size_t>(ndofs_), 0);
    for (int v = 0; v < nv; ++v)
        if (m.is_boundary_vertex(v))
            for (int c = 0; c < 3; ++c) is_boundary_[3 * v + c] = 1;
    for (int e = 0; e < m.num_edges(); ++e)
        if (m.is_boundary_edge(e)) is_boundary_[3 * nv + e] = 1;
    for (int d = 0; d < ndofs_; ++d)
        if (is_boundary_[d]) boundary_dofs_.push_back(d);
}

std::array<int, 12> CloughTocherSpace::element_dofs(int t) const
{
    const auto& tri = mesh_->triangle(t);
    const auto& edges = mesh_->triangle_edges(t);
    const int nv = mesh_->num_vertices();
    std::array<int, 12> d{};
    for (int i = 0; i < 3; ++i)
        for (int c = 0; c < 3; ++c) d[3 * i + c] = 3 * tri[i] + c;
    for (int k = 0; k < 3; ++k) d[9 + k] = 3 * nv + edges[k];
    return d;
}

int CloughTocherSpace::sub_triangle_of(const Barycentric& b)
{
    int k = 0;
    if (b[1] < b[k]) k = 1;
    if (b[2] < b[k]) k = 2;
    return k;
}

std::array<Vec2, 3> CloughTocherSpace::sub_triangle(int t, int k) const
{
    const auto& tri = mesh_->triangle(t);
    return {mesh_->vertex(tri[(k + 1) % 3]), mesh_->vertex(tri[(k + 2) % 3]), centers_[t]};
}

void CloughTocherSpace::eval(int t, int k, const Vec2& x, Values& out) const
{
    const Monomials mono(x, centers_[t], scales_[t]);
    const auto block = coeffs_[t].block<10, 12>(10 * k, 0);
    const Eigen::Matrix<double, 12, 1> v = block.transpose() * mono.v;
    const Eigen::Matrix<double, 12, 1> dx = block.transpose() * mono.dx;
    const Eigen::Matrix<double, 12, 1> dy = block.transpose() * mono.dy;
    const Eigen::Matrix<double, 12, 1> dxx = block.transpose() * mono.dxx;
    const Eigen::Matrix<double, 12, 1> dxy = block.transpose() * mono.dxy;
    const Eigen::Matrix<double, 12, 1> dyy = block.transpose() * mono.dyy;
    for (int j = 0; j < 12; ++j) {
        out.value[j] = v[j];
        out.grad[j] = Vec2(dx[j], dy[j]);
        out.hess[j] << dxx[j], dxy[j], dxy[j], dyy[j];
    }
}

StreamValue evaluate(const CloughTocherSpace& space, const Vector& coeffs, int t, const Barycentric& b)
{
    const Triangulation& m = space.mesh();
    const auto& tri = m.triangle(t);
    const Vec2 x = b[0] * m.vertex(tri[0]) + b[1] * m.vertex(tri[1]) + b[2] * m.vertex(tri[2]);
    CloughTocherSpace::Values vals;
    space.eval(t, CloughTocherSpace::sub_triangle_of(b), x, vals);
    const auto dofs = space.element_dofs(t);
    StreamValue out;
    for (int j = 0; j < 12; ++j) {
        const double c = coeffs[dofs[j]];
        out.psi += c * vals.value[j];
        out.grad += c * vals.grad[j];
        out.hess += c * vals.hess[j];
    }
    return out;
}

Vector interpolate(const CloughTocherSpace& space, const ScalarField& psi, const VectorField& grad_psi)
{
    const Triangulation& m = space.mesh();
    const int nv = m.num_vertices();
    Vector out(space.num_dofs());
    for (int v = 0; v < nv; ++v) {
        const Vec2& x = m.vertex(v);
        const Vec2 g = grad_psi(x);
        out[3 * v] = psi(x);
        out[3 * v + 1] = g.x();
        out[3 * v + 2] = g.y();
    }
    for (int e = 0; e < m.num_edges(); ++e) {
        const Vec2 mid = 0.5 * (m.vertex(m.edge(e)[0]) + m.vertex(m.edge(e)[1]));
        out[3 * nv + e] = grad_psi(mid).dot(m.edge_normal(e));
    }
    return out;
}

void for_each_sub_quadrature_point(const CloughTocherSpace& space, int t, int degree,
                                   const std::function<void(int, const Vec2&, double)>& kernel)
{
    const QuadratureRule& rule = triangle_rule(degree);
    const double w_scale = 2.0 * space.mesh().area(t) / 3.0;
    for (int k = 0; k < 3; ++k) {
        const auto s = space.sub_triangle(t, k);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const auto& p = rule.points[q];
            const Vec2 x = p[0] * s[0] + p[1] * s[1] + p[2] * s[2];
            kernel(k, x, rule.weights[q] * w_scale);
        }
    }
}

void write_coeffs(std::ostream& os, const CloughTocherSpace& space, const Vector& values)
{
    PRC_REQUIRE(values.size() == space.num_dofs(), "write_coeffs: length mismatch");
    os << "HCT " << space.mesh().cells_per_side() << ' ' << space.num_dofs() << '\n';
    os << std::setprecision(17);
    for (Eigen::Index i = 0; i < values.size(); ++i) os << values[i] << '\n';
}

Vector read_coeffs(std::istream& is, const CloughTocherSpace& space)
{
    std::string family;
    int n = 0;
    int ndofs = 0;
    PRC_REQUIRE(static_cast<bool>(is >> family >> n >> ndofs), "read_coeffs: malformed header");
    PRC_REQUIRE(family == "HCT", "read_coeffs: family mismatch (" + family + ")");
    PRC_REQUIRE(n == space.mesh().cells_per_side() && ndofs == space.num_dofs(),
                "read_coeffs: file does not match the space (n = " + std::to_string(n) +
                    ", dofs = " + std::to_string(ndofs) + ")");
    Vector values(ndofs);
    for (int i = 0; i < ndofs; ++i) PRC_REQUIRE(static_cast<bool>(is >> values[i]), "read_coeffs: truncated file");
    return values;
}

}  // namespace prc
