#include "prc/fe_space.hpp"

#include "prc/quadrature.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>

namespace prc {

std::string to_string(Family f)
{
    switch (f) {
    case Family::BR_velocity: return "BR_velocity";
    case Family::P0_pressure: return "P0_pressure";
    case Family::P2_velocity: return "P2_velocity";
    case Family::P1disc_pressure: return "P1disc_pressure";
    case Family::BDM1: return "BDM1";
    }
    return "?";
}

Family family_from_string(const std::string& s)
{
    for (Family f : {Family::BR_velocity, Family::P0_pressure, Family::P2_velocity, Family::P1disc_pressure,
                     Family::BDM1})
        if (to_string(f) == s) return f;
    throw Error("unknown finite-element family '" + s + "'");
}

bool is_vector_family(Family f)
{
    return f == Family::BR_velocity || f == Family::P2_velocity || f == Family::BDM1;
}

ElementGeometry ElementGeometry::of(const Triangulation& mesh, int t)
{
    const auto& tri = mesh.triangle(t);
    ElementGeometry g;
    g.origin = mesh.vertex(tri[0]);
    g.jacobian.col(0) = mesh.vertex(tri[1]) - g.origin;
    g.jacobian.col(1) = mesh.vertex(tri[2]) - g.origin;
    g.det = g.jacobian.determinant();
    g.inverse = g.jacobian.inverse();
    // rows of J^{-1} are the gradients of lambda_1 and lambda_2
    g.grad_lambda[1] = g.inverse.row(0).transpose();
    g.grad_lambda[2] = g.inverse.row(1).transpose();
    g.grad_lambda[0] = -g.grad_lambda[1] - g.grad_lambda[2];
    return g;
}

namespace {

const Vec2 kRefVertex[3] = {Vec2(0.0, 0.0), Vec2(1.0, 0.0), Vec2(0.0, 1.0)};

struct Bdm1Reference {
    // basis_i = sum_m coeff(m, i) * monomial_m with monomials
    // (1,0), (x,0), (y,0), (0,1), (0,x), (0,y)
    Eigen::Matrix<double, 6, 6> coeff;
};

const Bdm1Reference& bdm1_reference()
{
    static const Bdm1Reference ref = [] {
        auto monomial = [](int m, const Vec2& p) -> Vec2 {
            const double s[3] = {1.0, p.x(), p.y()};
            return m < 3 ? Vec2(s[m], 0.0) : Vec2(0.0, s[m - 3]);
        };
        const QuadratureRule& rule = edge_rule(4);
        Eigen::Matrix<double, 6, 6> vdm = Eigen::Matrix<double, 6, 6>::Zero();
        for (int k = 0; k < 3; ++k) {
            const Vec2& a = kRefVertex[(k + 1) % 3];
            const Vec2& b = kRefVertex[(k + 2) % 3];
            const Vec2 d = b - a;
            const Vec2 n = Vec2(d.y(), -d.x()).normalized();
            for (std::size_t q = 0; q < rule.size(); ++q) {
                const double t = rule.points[q][0];
                const Vec2 p = a + t * d;
                for (int m = 0; m < 6; ++m) {
                    const double flux = monomial(m, p).dot(n);
                    vdm(2 * k, m) += rule.weights[q] * flux;
                    vdm(2 * k + 1, m) += rule.weights[q] * flux * 3.0 * (2.0 * t - 1.0);
                }
            }
        }
        Bdm1Reference r;
        r.coeff = vdm.inverse();
        return r;
    }();
    return ref;
}

}  // namespace

void reference_bdm1(const Vec2& xi, std::array<Vec2, 6>& value, std::array<Mat2, 6>& grad)
{
    const auto& c = bdm1_reference().coeff;
    for (int i = 0; i < 6; ++i) {
        value[i] = Vec2(c(0, i) + c(1, i) * xi.x() + c(2, i) * xi.y(), c(3, i) + c(4, i) * xi.x() + c(5, i) * xi.y());
        grad[i] << c(1, i), c(2, i), c(4, i), c(5, i);
    }
}

FESpace::FESpace(MeshPtr mesh, Family family) : mesh_(std::move(mesh)), family_(family)
{
    PRC_REQUIRE(mesh_ != nullptr, "FESpace: null mesh");
    const Triangulation& m = *mesh_;
    const int nv = m.num_vertices();
    const int ne = m.num_edges();
    const int nt = m.num_triangles();

    switch (family_) {
    case Family::BR_velocity: ndofs_ = 2 * nv + ne; nloc_ = 9; break;
    case Family::P0_pressure: ndofs_ = nt; nloc_ = 1; break;
    case Family::P2_velocity: ndofs_ = 2 * (nv + ne); nloc_ = 12; break;
    case Family::P1disc_pressure: ndofs_ = 3 * nt; nloc_ = 3; break;
    case Family::BDM1: ndofs_ = 2 * ne; nloc_ = 6; break;
    }

    dofs_.assign(static_cast<std::size_t>(nt) * nloc_, -1);
    factors_.assign(dofs_.size(), 1.0);
    const double ref_edge_length[3] = {std::sqrt(2.0), 1.0, 1.0};

    for (int t = 0; t < nt; ++t) {
        int* d = dofs_.data() + static_cast<std::size_t>(t) * nloc_;
        double* f = factors_.data() + static_cast<std::size_t>(t) * nloc_;
        const auto& v = m.triangle(t);
        const auto& e = m.triangle_edges(t);
        const auto& s = m.triangle_edge_signs(t);
        switch (family_) {
        case Family::BR_velocity:
            for (int k = 0; k < 3; ++k) {
                d[k] = v[k];
                d[3 + k] = nv + v[k];
                d[6 + k] = 2 * nv + e[k];
                f[6 + k] = s[k];
            }
            break;
        case Family::P0_pressure: d[0] = t; break;
        case Family::P2_velocity:
            for (int k = 0; k < 3; ++k) {
                d[k] = v[k];
                d[3 + k] = nv + e[k];
                d[6 + k] = nv + ne + v[k];
                d[9 + k] = nv + ne + nv + e[k];
            }
            break;
        case Family::P1disc_pressure:
            for (int k = 0; k < 3; ++k) d[k] = 3 * t + k;
            break;
        case Family::BDM1:
            for (int k = 0; k < 3; ++k) {
                const double scale = m.edge_length(e[k]) / ref_edge_length[k];
                d[2 * k] = 2 * e[k];
                d[2 * k + 1] = 2 * e[k] + 1;
                f[2 * k] = s[k] * scale;
                f[2 * k + 1] = scale;
            }
            break;
        }
    }

    is_boundary_.assign(static_cast<std::size_t>(ndofs_), 0);
    auto mark = [this](int dof) { is_boundary_[dof] = 1; };
    for (int vtx = 0; vtx < nv; ++vtx) {
        if (!m.is_boundary_vertex(vtx)) continue;
        if (family_ == Family::BR_velocity) {
            mark(vtx);
            mark(nv + vtx);
        } else if (family_ == Family::P2_velocity) {
            mark(vtx);
            mark(nv + ne + vtx);
        }
    }
    for (int ed = 0; ed < ne; ++ed) {
        if (!m.is_boundary_edge(ed)) continue;
        if (family_ == Family::BR_velocity) {
            mark(2 * nv + ed);
        } else if (family_ == Family::P2_velocity) {
            mark(nv + ed);
            mark(nv + ne + nv + ed);
        } else if (family_ == Family::BDM1) {
            mark(2 * ed);
            mark(2 * ed + 1);
        }
    }
    for (int dof = 0; dof < ndofs_; ++dof)
        if (is_boundary_[dof]) boundary_dofs_.push_back(dof);
}

void FESpace::eval(int t, const Barycentric& b, BasisValues& out) const
{
    eval(ElementGeometry::of(*mesh_, t), t, b, out);
}

void FESpace::eval(const ElementGeometry& geo, int t, const Barycentric& b, BasisValues& out) const
{
    out.n = nloc_;
    const auto& gl = geo.grad_lambda;
    const double* f = factors_.data() + static_cast<std::size_t>(t) * nloc_;

    switch (family_) {
    case Family::BR_velocity: {
        for (int k = 0; k < 3; ++k) {
            out.value[k] = Vec2(b[k], 0.0);
            out.grad[k] << gl[k].x(), gl[k].y(), 0.0, 0.0;
            out.div[k] = gl[k].x();
            out.value[3 + k] = Vec2(0.0, b[k]);
            out.grad[3 + k] << 0.0, 0.0, gl[k].x(), gl[k].y();
            out.div[3 + k] = gl[k].y();
        }
        const auto& tri = mesh_->triangle(t);
        for (int k = 0; k < 3; ++k) {
            const int a = (k + 1) % 3;
            const int c = (k + 2) % 3;
            const Vec2 d = mesh_->vertex(tri[c]) - mesh_->vertex(tri[a]);
            const Vec2 n = Vec2(d.y(), -d.x()).normalized() * f[6 + k];
            const double bubble = 6.0 * b[a] * b[c];
            const Vec2 gb = 6.0 * (b[a] * gl[c] + b[c] * gl[a]);
            out.value[6 + k] = n * bubble;
            out.grad[6 + k] = n * gb.transpose();
            out.div[6 + k] = n.dot(gb);
        }
        break;
    }
    case Family::P2_velocity: {
        double phi[6];
        Vec2 gphi[6];
        for (int k = 0; k < 3; ++k) {
            phi[k] = b[k] * (2.0 * b[k] - 1.0);
            gphi[k] = (4.0 * b[k] - 1.0) * gl[k];
            const int a = (k + 1) % 3;
            const int c = (k + 2) % 3;
            phi[3 + k] = 4.0 * b[a] * b[c];
            gphi[3 + k] = 4.0 * (b[a] * gl[c] + b[c] * gl[a]);
        }
        for (int k = 0; k < 6; ++k) {
            out.value[k] = Vec2(phi[k], 0.0);
            out.grad[k] << gphi[k].x(), gphi[k].y(), 0.0, 0.0;
            out.div[k] = gphi[k].x();
            out.value[6 + k] = Vec2(0.0, phi[k]);
            out.grad[6 + k] << 0.0, 0.0, gphi[k].x(), gphi[k].y();
            out.div[6 + k] = gphi[k].y();
        }
        break;
    }
    case Family::BDM1: {
        std::array<Vec2, 6> v;
        std::array<Mat2, 6> g;
        reference_bdm1(Vec2(b[1], b[2]), v, g);
        const double inv_det = 1.0 / geo.det;
        for (int i = 0; i < 6; ++i) {
            out.value[i] = f[i] * inv_det * (geo.jacobian * v[i]);
            out.grad[i] = f[i] * inv_det * (geo.jacobian * g[i] * geo.inverse);
            out.div[i] = f[i] * inv_det * g[i].trace();
        }
        break;
    }
    case Family::P0_pressure: out.scalar[0] = 1.0; break;
    case Family::P1disc_pressure:
        for (int k = 0; k < 3; ++k) out.scalar[k] = b[k];
        break;
    }
}

SpacePtr build_space(MeshPtr mesh, Family family)
{
    return std::make_shared<const FESpace>(std::move(mesh), family);
}

Vector interpolate(const FESpace& space, const VectorField& field, int degree)
{
    PRC_REQUIRE(is_vector_family(space.family()), "interpolate: vector field needs a vector family");
    const Triangulation& m = space.mesh();
    const int nv = m.num_vertices();
    const int ne = m.num_edges();
    Vector c = Vector::Zero(space.num_dofs());
    const QuadratureRule& rule = edge_rule(degree);

    // Normal moment of the field against q on edge e (global orientation).
    auto edge_moment = [&](int e, int j) {
        const Vec2& a = m.vertex(m.edge(e)[0]);
        const Vec2& b = m.vertex(m.edge(e)[1]);
        const Vec2 n = m.edge_normal(e);
        double sum = 0.0;
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const double t = rule.points[q][0];
            const double weight = j == 0 ? 1.0 : 3.0 * (2.0 * t - 1.0);
            sum += rule.weights[q] * field(a + t * (b - a)).dot(n) * weight;
        }
        return sum;
    };

    switch (space.family()) {
    case Family::BR_velocity:
        for (int v = 0; v < nv; ++v) {
            const Vec2 val = field(m.vertex(v));
            c[v] = val.x();
            c[nv + v] = val.y();
        }
        for (int e = 0; e < ne; ++e) {
            const int a = m.edge(e)[0];
            const int b = m.edge(e)[1];
            const Vec2 linear_mean(0.5 * (c[a] + c[b]), 0.5 * (c[nv + a] + c[nv + b]));
            c[2 * nv + e] = edge_moment(e, 0) - linear_mean.dot(m.edge_normal(e));
        }
        break;
    case Family::P2_velocity:
        for (int v = 0; v < nv; ++v) {
            const Vec2 val = field(m.vertex(v));
            c[v] = val.x();
            c[nv + ne + v] = val.y();
        }
        for (int e = 0; e < ne; ++e) {
            const Vec2 val = field(0.5 * (m.vertex(m.edge(e)[0]) + m.vertex(m.edge(e)[1])));
            c[nv + e] = val.x();
            c[nv + ne + nv + e] = val.y();
        }
        break;
    case Family::BDM1:
        for (int e = 0; e < ne; ++e) {
            c[2 * e] = edge_moment(e, 0);
            c[2 * e + 1] = edge_moment(e, 1);
        }
        break;
    default: break;
    }
    return c;
}

Vector interpolate(const FESpace& space, const ScalarField& field, int degree)
{
    PRC_REQUIRE(!is_vector_family(space.family()), "interpolate: scalar field needs a pressure family");
    const Triangulation& m = space.mesh();
    const QuadratureRule& rule = triangle_rule(degree);
    Vector c = Vector::Zero(space.num_dofs());
    for (int t = 0; t < m.num_triangles(); ++t) {
        const ElementGeometry geo = ElementGeometry::of(m, t);
        Eigen::Vector3d moments = Eigen::Vector3d::Zero();
        double mean = 0.0;
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const auto& b = rule.points[q];
            const double w = rule.weights[q] * geo.det;
            const double val = field(geo.map(b));
            mean += w * val;
            for (int k = 0; k < 3; ++k) moments[k] += w * val * b[k];
        }
        if (space.family() == Family::P0_pressure) {
            c[t] = mean / geo.area();
        } else {
            Eigen::Matrix3d mass;
            mass << 2, 1, 1, 1, 2, 1, 1, 1, 2;
            mass *= geo.area() / 12.0;
            const Eigen::Vector3d local = mass.ldlt().solve(moments);
            for (int k = 0; k < 3; ++k) c[3 * t + k] = local[k];
        }
    }
    return c;
}

PointValue evaluate(const FESpace& space, const Vector& coeffs, int t, const Barycentric& b)
{
    PRC_REQUIRE(coeffs.size() == space.num_dofs(), "evaluate: coefficient vector length mismatch");
    BasisValues bv;
    space.eval(t, b, bv);
    const auto dofs = space.element_dofs(t);
    PointValue pv;
    const bool vec = is_vector_family(space.family());
    for (int k = 0; k < bv.n; ++k) {
        const double c = coeffs[dofs[k]];
        if (vec) {
            pv.value += c * bv.value[k];
            pv.grad += c * bv.grad[k];
            pv.div += c * bv.div[k];
        } else {
            pv.scalar += c * bv.scalar[k];
        }
    }
    return pv;
}

void write_coeffs(std::ostream& os, const FESpace& space, const Vector& values)
{
    PRC_REQUIRE(values.size() == space.num_dofs(), "write_coeffs: length mismatch");
    os << to_string(space.family()) << ' ' << space.mesh().cells_per_side() << ' ' << space.num_dofs() << '\n';
    os << std::setprecision(17);
    for (Eigen::Index i = 0; i < values.size(); ++i) os << values[i] << '\n';
}

Vector read_coeffs(std::istream& is, const FESpace& space)
{
    std::string family;
    int n = 0;
    int ndofs = 0;
    PRC_REQUIRE(static_cast<bool>(is >> family >> n >> ndofs), "read_coeffs: malformed header");
    PRC_REQUIRE(family_from_string(family) == space.family(), "read_coeffs: family mismatch (" + family + ")");
    PRC_REQUIRE(n == space.mesh().cells_per_side() && ndofs == space.num_dofs(),
                "read_coeffs: file does not match the space (n = " + std::to_string(n) +
                    ", dofs = " + std::to_string(ndofs) + ")");
    Vector values(ndofs);
    for (int i = 0; i < ndofs; ++i) PRC_REQUIRE(static_cast<bool>(is >> values[i]), "read_coeffs: truncated file");
    return values;
}

}  // namespace prc
