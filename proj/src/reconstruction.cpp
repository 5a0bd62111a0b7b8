#include "prc/reconstruction.hpp"

#include "prc/quadrature.hpp"

namespace prc {

namespace {

ReconstructionOperator::LocalMatrix local_moments(const FESpace& br, int t)
{
    const Triangulation& m = br.mesh();
    const ElementGeometry geo = ElementGeometry::of(m, t);
    // three Gauss points: exact for the quadratic traces times linear weights
    const QuadratureRule& rule = edge_rule(5);
    ReconstructionOperator::LocalMatrix r = ReconstructionOperator::LocalMatrix::Zero();
    BasisValues bv;
    for (int k = 0; k < 3; ++k) {
        const int e = m.triangle_edges(t)[k];
        const int s = m.triangle_edge_signs(t)[k];
        const Vec2 n = m.edge_normal(e);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const double tl = rule.points[q][0];
            const double tg = s > 0 ? tl : 1.0 - tl;
            Barycentric b{};
            b[k] = 0.0;
            b[(k + 1) % 3] = 1.0 - tl;
            b[(k + 2) % 3] = tl;
            br.eval(geo, t, b, bv);
            const double w = rule.weights[q];
            for (int i = 0; i < 9; ++i) {
                const double flux = bv.value[i].dot(n);
                r(2 * k, i) += w * flux;
                r(2 * k + 1, i) += w * flux * 3.0 * (2.0 * tg - 1.0);
            }
        }
    }
    return r;
}

}  // namespace

ReconstructionOperator::ReconstructionOperator(SpacePtr br, SpacePtr bdm, Exec exec)
    : br_(std::move(br)), bdm_(std::move(bdm))
{
    PRC_REQUIRE(br_ && bdm_, "build_reconstruction: null space");
    PRC_REQUIRE(br_->family() == Family::BR_velocity && bdm_->family() == Family::BDM1,
                "build_reconstruction: expects a Bernardi-Raugel source and a BDM1 target");
    PRC_REQUIRE(br_->mesh_ptr() == bdm_->mesh_ptr(), "build_reconstruction: spaces live on different meshes");

    const Triangulation& m = br_->mesh();
    const int nt = m.num_triangles();
    local_.resize(static_cast<std::size_t>(nt));
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
        for (int t = 0; t < nt; ++t) local_[t] = local_moments(*br_, t);
    } else {
        for (int t = 0; t < nt; ++t) local_[t] = local_moments(*br_, t);
    }

    // Each edge takes its rows from the first adjacent triangle.
    std::vector<Triplet> triplets;
    triplets.reserve(static_cast<std::size_t>(m.num_edges()) * 18);
    for (int e = 0; e < m.num_edges(); ++e) {
        const int t = m.edge_triangles(e)[0];
        int k = 0;
        while (m.triangle_edges(t)[k] != e) ++k;
        const auto cols = br_->element_dofs(t);
        for (int j = 0; j < 2; ++j)
            for (int i = 0; i < 9; ++i)
                if (local_[t](2 * k + j, i) != 0.0) triplets.emplace_back(2 * e + j, cols[i], local_[t](2 * k + j, i));
    }
    global_.resize(bdm_->num_dofs(), br_->num_dofs());
    global_.setFromTriplets(triplets.begin(), triplets.end());
}

Vector ReconstructionOperator::apply(const Vector& br_coeffs) const
{
    PRC_REQUIRE(br_coeffs.size() == br_->num_dofs(), "reconstruction apply: length mismatch");
    return global_ * br_coeffs;
}

ReconstructionOperator build_reconstruction(SpacePtr br, SpacePtr bdm, Exec exec)
{
    return ReconstructionOperator(std::move(br), std::move(bdm), exec);
}

}  // namespace prc
