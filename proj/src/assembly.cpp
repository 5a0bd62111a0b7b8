#include "prc/assembly.hpp"

#include "prc/quadrature.hpp"

#include <Eigen/Dense>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace prc {

SparseMatrix assemble_from_elements(int rows, int cols, int num_elements, Exec exec, const ElementKernel& kernel)
{
    std::vector<Triplet> triplets;
    if (exec == Exec::Serial) {
        for (int t = 0; t < num_elements; ++t) kernel(t, triplets);
    } else {
        std::vector<std::vector<Triplet>> chunks;
#pragma omp parallel
        {
            int tid = 0;
            int nth = 1;
#ifdef _OPENMP
            tid = omp_get_thread_num();
            nth = omp_get_num_threads();
#endif
#pragma omp single
            chunks.resize(static_cast<std::size_t>(nth));
            const int begin = static_cast<int>(static_cast<long long>(num_elements) * tid / nth);
            const int end = static_cast<int>(static_cast<long long>(num_elements) * (tid + 1) / nth);
            auto& mine = chunks[static_cast<std::size_t>(tid)];
            for (int t = begin; t < end; ++t) kernel(t, mine);
        }
        std::size_t total = 0;
        for (const auto& c : chunks) total += c.size();
        triplets.reserve(total);
        for (auto& c : chunks) {
            triplets.insert(triplets.end(), c.begin(), c.end());
            std::vector<Triplet>().swap(c);
        }
    }
    SparseMatrix mat(rows, cols);
    mat.setFromTriplets(triplets.begin(), triplets.end());
    return mat;
}

Vector assemble_vector_from_elements(const FESpace& space, Exec exec,
                                     const std::function<void(int, Eigen::Ref<Eigen::VectorXd>)>& kernel)
{
    const int nt = space.mesh().num_triangles();
    const int nloc = space.local_size();
    Eigen::MatrixXd local = Eigen::MatrixXd::Zero(nloc, nt);
    if (exec == Exec::Serial) {
        for (int t = 0; t < nt; ++t) kernel(t, local.col(t));
    } else {
#pragma omp parallel for schedule(static)
        for (int t = 0; t < nt; ++t) kernel(t, local.col(t));
    }
    Vector out = Vector::Zero(space.num_dofs());
    for (int t = 0; t < nt; ++t) {
        const auto dofs = space.element_dofs(t);
        for (int k = 0; k < nloc; ++k) out[dofs[k]] += local(k, t);
    }
    return out;
}

namespace {

void require_vector(const FESpace& v, const char* what)
{
    PRC_REQUIRE(is_vector_family(v.family()), std::string(what) + ": expects a vector-valued space");
}

void emit(const Eigen::MatrixXd& local, std::span<const int> rows, std::span<const int> cols, std::vector<Triplet>& out)
{
    for (Eigen::Index i = 0; i < local.rows(); ++i)
        for (Eigen::Index j = 0; j < local.cols(); ++j)
            if (local(i, j) != 0.0) out.emplace_back(rows[i], cols[j], local(i, j));
}

// Local mass between the velocity basis (rows) and the BDM1 basis (columns).
Eigen::MatrixXd mixed_bdm_mass(const FESpace& velocity, const FESpace& bdm, int t, const QuadratureRule& rule)
{
    const ElementGeometry geo = ElementGeometry::of(velocity.mesh(), t);
    BasisValues bv, bw;
    Eigen::MatrixXd local = Eigen::MatrixXd::Zero(velocity.local_size(), 6);
    for (std::size_t q = 0; q < rule.size(); ++q) {
        velocity.eval(geo, t, rule.points[q], bv);
        bdm.eval(geo, t, rule.points[q], bw);
        const double w = rule.weights[q] * geo.det;
        for (int i = 0; i < bv.n; ++i)
            for (int j = 0; j < 6; ++j) local(i, j) += w * bv.value[i].dot(bw.value[j]);
    }
    return local;
}

Eigen::MatrixXd reconstruction_block(const ReconstructionOperator& recon, int t)
{
    return recon.local(t);
}

}  // namespace

SparseMatrix assemble_vector_laplacian(const FESpace& velocity, const AssemblyOptions& opts)
{
    require_vector(velocity, "assemble_vector_laplacian");
    const QuadratureRule& rule = triangle_rule(opts.degree);
    const int n = velocity.num_dofs();
    return assemble_from_elements(n, n, velocity.mesh().num_triangles(), opts.exec,
                                  [&](int t, std::vector<Triplet>& out) {
                                      const ElementGeometry geo = ElementGeometry::of(velocity.mesh(), t);
                                      BasisValues bv;
                                      const int nl = velocity.local_size();
                                      Eigen::MatrixXd local = Eigen::MatrixXd::Zero(nl, nl);
                                      for (std::size_t q = 0; q < rule.size(); ++q) {
                                          velocity.eval(geo, t, rule.points[q], bv);
                                          const double w = opts.coefficient * rule.weights[q] * geo.det;
                                          for (int i = 0; i < nl; ++i)
                                              for (int j = 0; j < nl; ++j)
                                                  local(i, j) += w * (bv.grad[i].cwiseProduct(bv.grad[j])).sum();
                                      }
                                      const auto dofs = velocity.element_dofs(t);
                                      emit(local, dofs, dofs, out);
                                  });
}

SparseMatrix assemble_divergence(const FESpace& velocity, const FESpace& pressure, const AssemblyOptions& opts)
{
    require_vector(velocity, "assemble_divergence");
    PRC_REQUIRE(!is_vector_family(pressure.family()), "assemble_divergence: expects a scalar pressure space");
    PRC_REQUIRE(velocity.mesh_ptr() == pressure.mesh_ptr(), "assemble_divergence: spaces on different meshes");
    const QuadratureRule& rule = triangle_rule(opts.degree);
    return assemble_from_elements(pressure.num_dofs(), velocity.num_dofs(), velocity.mesh().num_triangles(),
                                  opts.exec, [&](int t, std::vector<Triplet>& out) {
                                      const ElementGeometry geo = ElementGeometry::of(velocity.mesh(), t);
                                      BasisValues bv, bq;
                                      Eigen::MatrixXd local =
                                          Eigen::MatrixXd::Zero(pressure.local_size(), velocity.local_size());
                                      for (std::size_t q = 0; q < rule.size(); ++q) {
                                          velocity.eval(geo, t, rule.points[q], bv);
                                          pressure.eval(geo, t, rule.points[q], bq);
                                          const double w = opts.coefficient * rule.weights[q] * geo.det;
                                          for (int i = 0; i < bq.n; ++i)
                                              for (int j = 0; j < bv.n; ++j) local(i, j) += w * bq.scalar[i] * bv.div[j];
                                      }
                                      emit(local, pressure.element_dofs(t), velocity.element_dofs(t), out);
                                  });
}

SparseMatrix assemble_mass(const FESpace& velocity, MassMode mode, Region region,
                           const ReconstructionOperator* recon, const AssemblyOptions& opts)
{
    require_vector(velocity, "assemble_mass");
    if (mode != MassMode::IdId) {
        PRC_REQUIRE(recon != nullptr, "assemble_mass: reconstructed mass mode requires a reconstruction operator");
        PRC_REQUIRE(&recon->source() == &velocity, "assemble_mass: reconstruction does not act on this space");
    }
    const QuadratureRule& rule = triangle_rule(opts.degree);
    const Triangulation& mesh = velocity.mesh();
    const int n = velocity.num_dofs();
    return assemble_from_elements(n, n, mesh.num_triangles(), opts.exec, [&](int t, std::vector<Triplet>& out) {
        if (!mesh.in_region(t, region)) return;
        const auto dofs = velocity.element_dofs(t);
        Eigen::MatrixXd local;
        if (mode == MassMode::IdId) {
            const ElementGeometry geo = ElementGeometry::of(mesh, t);
            BasisValues bv;
            const int nl = velocity.local_size();
            local = Eigen::MatrixXd::Zero(nl, nl);
            for (std::size_t q = 0; q < rule.size(); ++q) {
                velocity.eval(geo, t, rule.points[q], bv);
                const double w = rule.weights[q] * geo.det;
                for (int i = 0; i < nl; ++i)
                    for (int j = 0; j < nl; ++j) local(i, j) += w * bv.value[i].dot(bv.value[j]);
            }
        } else if (mode == MassMode::PiPi) {
            const Eigen::MatrixXd r = reconstruction_block(*recon, t);
            const Eigen::MatrixXd mb = mixed_bdm_mass(recon->target(), recon->target(), t, rule);
            local = r.transpose() * mb * r;
        } else {
            // (phi_i, Pi phi_j): the IdPi block; PiId is its exact transpose.
            const Eigen::MatrixXd r = reconstruction_block(*recon, t);
            const Eigen::MatrixXd mixed = mixed_bdm_mass(velocity, recon->target(), t, rule);
            local = mixed * r;
            if (mode == MassMode::PiId) local.transposeInPlace();
        }
        local *= opts.coefficient;
        emit(local, dofs, dofs, out);
    });
}

Vector assemble_load(const FESpace& velocity, const VectorField& field, TestMode mode, Region region,
                     const ReconstructionOperator* recon, const AssemblyOptions& opts)
{
    require_vector(velocity, "assemble_load");
    if (mode == TestMode::Pi) {
        PRC_REQUIRE(recon != nullptr, "assemble_load: reconstructed test mode requires a reconstruction operator");
        PRC_REQUIRE(&recon->source() == &velocity, "assemble_load: reconstruction does not act on this space");
    }
    const QuadratureRule& rule = triangle_rule(opts.degree);
    const Triangulation& mesh = velocity.mesh();
    return assemble_vector_from_elements(velocity, opts.exec, [&](int t, Eigen::Ref<Eigen::VectorXd> local) {
        local.setZero();
        if (!mesh.in_region(t, region)) return;
        const ElementGeometry geo = ElementGeometry::of(mesh, t);
        const FESpace& test = mode == TestMode::Pi ? recon->target() : velocity;
        BasisValues bv;
        Eigen::VectorXd moments = Eigen::VectorXd::Zero(test.local_size());
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const auto& b = rule.points[q];
            test.eval(geo, t, b, bv);
            const Vec2 f = field(geo.map(b));
            const double w = opts.coefficient * rule.weights[q] * geo.det;
            for (int i = 0; i < bv.n; ++i) moments[i] += w * f.dot(bv.value[i]);
        }
        if (mode == TestMode::Pi)
            local = recon->local(t).transpose() * moments;
        else
            local = moments;
    });
}

Vector assemble_gradient_load(const FESpace& velocity, const GradientField& grad_w, const AssemblyOptions& opts)
{
    require_vector(velocity, "assemble_gradient_load");
    const QuadratureRule& rule = triangle_rule(opts.degree);
    return assemble_vector_from_elements(velocity, opts.exec, [&](int t, Eigen::Ref<Eigen::VectorXd> local) {
        local.setZero();
        const ElementGeometry geo = ElementGeometry::of(velocity.mesh(), t);
        BasisValues bv;
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const auto& b = rule.points[q];
            velocity.eval(geo, t, b, bv);
            const Mat2 g = grad_w(geo.map(b));
            const double w = opts.coefficient * rule.weights[q] * geo.det;
            for (int i = 0; i < bv.n; ++i) local[i] += w * g.cwiseProduct(bv.grad[i]).sum();
        }
    });
}

Vector assemble_divergence_load(const FESpace& velocity, const ScalarField& psi, const AssemblyOptions& opts)
{
    require_vector(velocity, "assemble_divergence_load");
    const QuadratureRule& rule = triangle_rule(opts.degree);
    return assemble_vector_from_elements(velocity, opts.exec, [&](int t, Eigen::Ref<Eigen::VectorXd> local) {
        local.setZero();
        const ElementGeometry geo = ElementGeometry::of(velocity.mesh(), t);
        BasisValues bv;
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const auto& b = rule.points[q];
            velocity.eval(geo, t, b, bv);
            const double w = opts.coefficient * rule.weights[q] * geo.det * psi(geo.map(b));
            for (int i = 0; i < bv.n; ++i) local[i] += w * bv.div[i];
        }
    });
}

Vector pressure_integrals(const FESpace& pressure)
{
    PRC_REQUIRE(!is_vector_family(pressure.family()), "pressure_integrals: expects a scalar space");
    const Triangulation& mesh = pressure.mesh();
    Vector m = Vector::Zero(pressure.num_dofs());
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto dofs = pressure.element_dofs(t);
        // P0: |T|; P1disc: |T|/3 per barycentric hat
        const double share = mesh.area(t) / pressure.local_size();
        for (int d : dofs) m[d] += share;
    }
    return m;
}

}  // namespace prc
