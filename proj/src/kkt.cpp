#include "prc/kkt.hpp"

#include <Eigen/LU>
#include <Eigen/UmfPackSupport>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

namespace prc {

std::string KktLayout::block_name(int i) const
{
    if (i < p()) return "u";
    if (i < z()) return "p";
    if (i < lambda()) return "z";
    if (i < mean_p()) return "lambda";
    if (i == mean_p()) return "mean(p) multiplier";
    return "mean(lambda) multiplier";
}

namespace {

void add_block(std::vector<Triplet>& out, const SparseMatrix& m, int r0, int c0, double scale,
               const std::vector<std::uint8_t>& fixed)
{
    for (int col = 0; col < m.outerSize(); ++col) {
        for (SparseMatrix::InnerIterator it(m, col); it; ++it) {
            const int r = r0 + static_cast<int>(it.row());
            const int c = c0 + static_cast<int>(it.col());
            if (fixed[r] || fixed[c]) continue;
            out.emplace_back(r, c, scale * it.value());
        }
    }
}

void add_mean_constraint(std::vector<Triplet>& out, const Vector& integrals, int offset, int row)
{
    for (Eigen::Index i = 0; i < integrals.size(); ++i) {
        out.emplace_back(row, offset + static_cast<int>(i), integrals[i]);
        out.emplace_back(offset + static_cast<int>(i), row, integrals[i]);
    }
}

using Lu = Eigen::UmfPackLU<SparseMatrix>;

int smallest_pivot_column(const Lu& lu)
{
    try {
        const auto& u = lu.matrixU();
        const auto& q = lu.permutationQ();
        int worst = -1;
        double smallest = std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < std::min(u.rows(), u.cols()); ++k) {
            const double d = std::abs(u.coeff(k, k));
            if (d < smallest) {
                smallest = d;
                worst = static_cast<int>(q[k]);
            }
        }
        return worst;
    } catch (...) {
        return -1;
    }
}

[[noreturn]] void throw_singular(int unknown, const std::function<std::string(int)>& namer)
{
    const std::string where =
        unknown >= 0 ? namer(unknown) + " (unknown " + std::to_string(unknown) + ")" : std::string("unknown block");
    throw SolverError("sparse LU factorization failed: matrix is singular; zero pivot in block " + where);
}

void factorize(Lu& lu, const SparseMatrix& a, const std::function<int(int)>& to_global,
               const std::function<std::string(int)>& namer)
{
    lu.compute(a);
    if (lu.info() != Eigen::Success) {
        const int local = smallest_pivot_column(lu);
        throw_singular(local >= 0 ? to_global(local) : -1, namer);
    }
}

// Direct solver for matrices with a few dense border rows and columns (the
// zero-mean multipliers). The border is eliminated with a low-rank update so
// that the sparse factorization only sees the core block, in which one core
// unknown per border row is replaced by an identity row and column.
class BorderedSolver {
public:
    BorderedSolver(const SparseMatrix& k, const std::vector<int>& border,
                   const std::function<std::string(int)>& namer)
        : n_(static_cast<int>(k.rows()))
    {
        const int nb = static_cast<int>(border.size());
        std::vector<int> local(static_cast<std::size_t>(n_), -1);
        for (int b = 0; b < nb; ++b) local[border[b]] = -2 - b;
        for (int i = 0; i < n_; ++i)
            if (local[i] == -1) {
                local[i] = static_cast<int>(core_.size());
                core_.push_back(i);
            }
        const int n0 = static_cast<int>(core_.size());
        border_ = border;

        // Pins: core column with the largest entry in each border row.
        const SparseMatrix kr = SparseMatrix(k.transpose());
        std::vector<int> pins;
        for (int b = 0; b < nb; ++b) {
            int best = -1;
            double big = 0.0;
            for (SparseMatrix::InnerIterator it(kr, border[b]); it; ++it) {
                const int j = local[it.row()];
                if (j < 0 || std::find(pins.begin(), pins.end(), j) != pins.end()) continue;
                if (std::abs(it.value()) > big) {
                    big = std::abs(it.value());
                    best = j;
                }
            }
            PRC_REQUIRE(best >= 0, "bordered solve: border row without core coupling");
            pins.push_back(best);
        }
        std::vector<std::uint8_t> pinned(static_cast<std::size_t>(n0), 0);
        for (int j : pins) pinned[j] = 1;

        // Core with pinned identities, and the pieces of K0 - Kpin.
        std::vector<Triplet> core_trip, c_trip, r_trip, zt_trip, drow_trip, dcol_trip;
        for (int col = 0; col < k.outerSize(); ++col) {
            for (SparseMatrix::InnerIterator it(k, col); it; ++it) {
                const int gi = static_cast<int>(it.row());
                const int li = local[gi], lj = local[col];
                const double v = it.value();
                if (li >= 0 && lj >= 0) {
                    if (pinned[li] || pinned[lj]) {
                        // K0 = Kpin - Delta; collect -Delta restricted to pinned rows/columns
                        if (pinned[li]) drow_trip.emplace_back(rank_of(pins, li), lj, v);
                        else dcol_trip.emplace_back(li, rank_of(pins, lj), v);
                    } else {
                        core_trip.emplace_back(li, lj, v);
                    }
                } else if (li >= 0) {
                    c_trip.emplace_back(li, -2 - lj, v);
                } else if (lj >= 0) {
                    r_trip.emplace_back(lj, -2 - li, v);
                } else {
                    zt_trip.emplace_back(-2 - lj, -2 - li, v);
                }
            }
        }
        for (int p = 0; p < nb; ++p) {
            const int j = pins[p];
            core_trip.emplace_back(j, j, 1.0);
            drow_trip.emplace_back(p, j, -1.0);
        }
        kpin_.resize(n0, n0);
        kpin_.setFromTriplets(core_trip.begin(), core_trip.end());
        kpin_.makeCompressed();
        factorize(lu_, kpin_, [this](int i) { return core_[i]; }, namer);

        // K = D + U V^T with D = diag(Kpin, I). Rows of U and V: core then border.
        const int r = 4 * nb;
        const int nn = n0 + nb;
        std::vector<Triplet> ut, vt;
        SparseMatrix drow(nb, n0), dcol(n0, nb), c(n0, nb), rr(n0, nb), zt(nb, nb);
        drow.setFromTriplets(drow_trip.begin(), drow_trip.end());
        dcol.setFromTriplets(dcol_trip.begin(), dcol_trip.end());
        c.setFromTriplets(c_trip.begin(), c_trip.end());
        rr.setFromTriplets(r_trip.begin(), r_trip.end());
        zt.setFromTriplets(zt_trip.begin(), zt_trip.end());
        for (int p = 0; p < nb; ++p) {
            // pinned rows: -Delta(J,:) = drow  ->  P * drow
            ut.emplace_back(pins[p], p, 1.0);
            // pinned columns (outside pinned rows): dcol * P^T
            for (SparseMatrix::InnerIterator it(dcol, p); it; ++it) ut.emplace_back(it.row(), nb + p, it.value());
            vt.emplace_back(pins[p], nb + p, 1.0);
            // border column block C
            for (SparseMatrix::InnerIterator it(c, p); it; ++it) ut.emplace_back(it.row(), 2 * nb + p, it.value());
            vt.emplace_back(n0 + p, 2 * nb + p, 1.0);
            // border rows [R^T, Z - I]
            ut.emplace_back(n0 + p, 3 * nb + p, 1.0);
            for (SparseMatrix::InnerIterator it(rr, p); it; ++it) vt.emplace_back(it.row(), 3 * nb + p, it.value());
            vt.emplace_back(n0 + p, 3 * nb + p, -1.0);
        }
        for (int col = 0; col < zt.outerSize(); ++col)
            for (SparseMatrix::InnerIterator it(zt, col); it; ++it)
                vt.emplace_back(n0 + it.row(), 3 * nb + it.col(), it.value());
        const SparseMatrix drow_t = drow.transpose();
        for (int p = 0; p < nb; ++p)
            for (SparseMatrix::InnerIterator it(drow_t, p); it; ++it) vt.emplace_back(it.row(), p, it.value());
        u_.resize(nn, r);
        v_.resize(nn, r);
        u_.setFromTriplets(ut.begin(), ut.end());
        v_.setFromTriplets(vt.begin(), vt.end());

        du_.resize(nn, r);
        for (int j = 0; j < r; ++j) du_.col(j) = apply_d(Vector(u_.col(j)));
        const Eigen::MatrixXd cap = Eigen::MatrixXd::Identity(r, r) + Eigen::MatrixXd(v_.transpose() * du_);
        cap_.compute(cap);
        if (!cap_.isInvertible()) throw_singular(border.front(), namer);
    }

    Vector solve(const Vector& rhs) const
    {
        const int n0 = static_cast<int>(core_.size());
        const int nb = static_cast<int>(border_.size());
        Vector y(n0 + nb);
        for (int i = 0; i < n0; ++i) y[i] = rhs[core_[i]];
        for (int b = 0; b < nb; ++b) y[n0 + b] = rhs[border_[b]];
        const Vector w = apply_d(y);
        const Vector z = w - du_ * cap_.solve(Vector(v_.transpose() * w));
        Vector x(n_);
        for (int i = 0; i < n0; ++i) x[core_[i]] = z[i];
        for (int b = 0; b < nb; ++b) x[border_[b]] = z[n0 + b];
        return x;
    }

private:
    static int rank_of(const std::vector<int>& pins, int j)
    {
        return static_cast<int>(std::find(pins.begin(), pins.end(), j) - pins.begin());
    }

    Vector apply_d(const Vector& y) const
    {
        const int n0 = static_cast<int>(core_.size());
        Vector out(y.size());
        out.head(n0) = lu_.solve(y.head(n0));
        out.tail(y.size() - n0) = y.tail(y.size() - n0);
        return out;
    }

    int n_;
    std::vector<int> core_;
    std::vector<int> border_;
    SparseMatrix kpin_;  // referenced by the factorization
    Lu lu_;
    SparseMatrix u_, v_;
    Eigen::MatrixXd du_;
    Eigen::FullPivLU<Eigen::MatrixXd> cap_;
};

// Rows and columns with many more entries than a typical finite-element row.
std::vector<int> dense_border(const SparseMatrix& k)
{
    const Eigen::Index n = k.rows();
    const double threshold = std::max(64.0, 10.0 * std::sqrt(static_cast<double>(n)));
    std::vector<int> cols;
    for (Eigen::Index j = 0; j < k.outerSize(); ++j)
        if (static_cast<double>(k.col(j).nonZeros()) > threshold) cols.push_back(static_cast<int>(j));
    if (cols.empty() || cols.size() > 8) return {};
    return cols;
}

}  // namespace

struct SparseDirectSolver::Impl {
    SparseMatrix matrix;
    std::unique_ptr<Lu> plain;
    std::unique_ptr<BorderedSolver> bordered;

    Vector apply_inverse(const Vector& b) const { return plain ? Vector(plain->solve(b)) : bordered->solve(b); }
};

SparseDirectSolver::SparseDirectSolver(const SparseMatrix& matrix, UnknownNamer namer) : impl_(std::make_unique<Impl>())
{
    PRC_REQUIRE(matrix.rows() == matrix.cols(), "SparseDirectSolver: matrix must be square");
    impl_->matrix = matrix;
    impl_->matrix.makeCompressed();
    const std::vector<int> border = dense_border(impl_->matrix);
    if (border.empty()) {
        impl_->plain = std::make_unique<Lu>();
        factorize(*impl_->plain, impl_->matrix, [](int i) { return i; }, namer);
    } else {
        impl_->bordered = std::make_unique<BorderedSolver>(impl_->matrix, border, namer);
    }
}

SparseDirectSolver::~SparseDirectSolver() = default;

Vector SparseDirectSolver::solve(const Vector& rhs, double tolerance, double* residual_out) const
{
    const SparseMatrix& a = impl_->matrix;
    PRC_REQUIRE(a.rows() == rhs.size(), "SparseDirectSolver: rhs length mismatch");
    const double bnorm = rhs.norm();
    if (bnorm == 0.0) {
        if (residual_out) *residual_out = 0.0;
        return Vector::Zero(rhs.size());
    }
    // Iterative refinement with residuals accumulated in extended precision:
    // small fields coupled to large multipliers (gradient data) otherwise
    // carry roundoff of the multiplier's size.
    using LongVector = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
    const auto residual = [&](const LongVector& x) {
        LongVector r = rhs.cast<long double>();
        for (int col = 0; col < a.outerSize(); ++col)
            for (SparseMatrix::InnerIterator it(a, col); it; ++it)
                r[it.row()] -= static_cast<long double>(it.value()) * x[col];
        return r;
    };
    LongVector x = impl_->apply_inverse(rhs).cast<long double>();
    LongVector r = residual(x);
    double rel = static_cast<double>(r.norm()) / bnorm;
    for (int step = 0; step < 8; ++step) {
        const LongVector candidate = x + impl_->apply_inverse(r.cast<double>()).cast<long double>();
        const LongVector rc = residual(candidate);
        const double rel_c = static_cast<double>(rc.norm()) / bnorm;
        if (!(rel_c < 0.5 * rel)) break;
        x = candidate;
        r = rc;
        rel = rel_c;
    }
    if (!std::isfinite(rel) || rel > tolerance) {
        std::ostringstream msg;
        msg << "sparse LU solve: relative residual " << rel << " above tolerance " << tolerance;
        throw SolverError(msg.str());
    }
    if (residual_out) *residual_out = rel;
    return x.cast<double>();
}

Vector solve_sparse(const SparseMatrix& matrix, const Vector& rhs, double tolerance, const UnknownNamer& namer,
                    double* residual_out)
{
    PRC_REQUIRE(matrix.rows() == rhs.size(), "solve_sparse: dimension mismatch");
    if (rhs.norm() == 0.0) {
        if (residual_out) *residual_out = 0.0;
        return Vector::Zero(rhs.size());
    }
    return SparseDirectSolver(matrix, namer).solve(rhs, tolerance, residual_out);
}

namespace {

struct PairingModes {
    TestMode observation;
    TestMode state;
};

PairingModes pairing_modes(Scheme scheme, const BuildOptions& opts)
{
    if (opts.identity_reconstruction) return {TestMode::Id, TestMode::Id};
    return {observation_mode(scheme), state_mode(scheme)};
}

}  // namespace

KktSystem build_system(const Discretization& disc, const SchemeConfig& cfg, const ExampleData& data,
                       const BuildOptions& opts)
{
    validate(cfg);
    PRC_REQUIRE(disc.velocity && disc.pressure, "build_system: incomplete discretization");
    PRC_REQUIRE(disc.scheme == cfg.scheme, "build_system: discretization built for scheme " +
                                               to_string(disc.scheme) + " but config requests " +
                                               to_string(cfg.scheme));
    if (cfg.scheme == Scheme::ScottVogelius)
        PRC_REQUIRE(disc.mesh->barycentric() && disc.velocity->family() == Family::P2_velocity,
                    "build_system: Scott-Vogelius needs P2 x P1disc on a barycentric mesh");
    else
        PRC_REQUIRE(disc.velocity->family() == Family::BR_velocity && disc.recon,
                    "build_system: Bernardi-Raugel schemes need the BR pair and a reconstruction");

    const FESpace& V = *disc.velocity;
    const FESpace& Q = *disc.pressure;
    const ReconstructionOperator* recon = disc.reconstruction();
    const double c = 1.0 / std::sqrt(cfg.alpha);

    const auto [obs, st] = pairing_modes(cfg.scheme, opts);
    auto mass_mode = [](TestMode m) { return m == TestMode::Pi ? MassMode::PiPi : MassMode::IdId; };

    const AssemblyOptions form{opts.exec, opts.assembly_degree, 1.0};
    const AssemblyOptions load{opts.exec, opts.data_degree, 1.0};

    KktSystem sys;
    sys.config = cfg;
    sys.layout = KktLayout{V.num_dofs(), Q.num_dofs()};
    const KktLayout& L = sys.layout;

    sys.stiffness = assemble_vector_laplacian(V, form);
    sys.divergence = assemble_divergence(V, Q, form);
    sys.state_coupling = c * assemble_mass(V, mass_mode(st), data.control_region, recon, form);
    sys.adjoint_coupling = -c * assemble_mass(V, mass_mode(obs), data.observation_region, recon, form);
    sys.state_load = assemble_load(V, data.f, st, Region::Whole, recon, load);
    sys.adjoint_load = -c * assemble_load(V, data.ud, obs, data.observation_region, recon, load);

    std::vector<std::uint8_t> fixed(static_cast<std::size_t>(L.size()), 0);
    for (int d : V.boundary_dofs()) {
        fixed[L.u() + d] = 1;
        fixed[L.z() + d] = 1;
    }

    const SparseMatrix bt = sys.divergence.transpose();
    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(2 * sys.stiffness.nonZeros() + 4 * sys.divergence.nonZeros() +
                                          sys.state_coupling.nonZeros() + sys.adjoint_coupling.nonZeros()) +
                 static_cast<std::size_t>(4 * Q.num_dofs() + L.size()));
    add_block(trip, sys.stiffness, L.u(), L.u(), cfg.nu, fixed);
    add_block(trip, bt, L.u(), L.p(), 1.0, fixed);
    add_block(trip, sys.state_coupling, L.u(), L.z(), 1.0, fixed);
    add_block(trip, sys.divergence, L.p(), L.u(), 1.0, fixed);
    add_block(trip, sys.adjoint_coupling, L.z(), L.u(), 1.0, fixed);
    add_block(trip, sys.stiffness, L.z(), L.z(), cfg.nu, fixed);
    add_block(trip, bt, L.z(), L.lambda(), 1.0, fixed);
    add_block(trip, sys.divergence, L.lambda(), L.z(), 1.0, fixed);
    const Vector means = pressure_integrals(Q);
    add_mean_constraint(trip, means, L.p(), L.mean_p());
    add_mean_constraint(trip, means, L.lambda(), L.mean_lambda());
    for (int i = 0; i < L.size(); ++i)
        if (fixed[i]) trip.emplace_back(i, i, 1.0);

    sys.matrix.resize(L.size(), L.size());
    sys.matrix.setFromTriplets(trip.begin(), trip.end());

    sys.rhs = Vector::Zero(L.size());
    sys.rhs.segment(L.u(), L.nv) = sys.state_load;
    sys.rhs.segment(L.z(), L.nv) = sys.adjoint_load;
    for (int d : V.boundary_dofs()) {
        sys.rhs[L.u() + d] = 0.0;
        sys.rhs[L.z() + d] = 0.0;
    }
    return sys;
}

Vector build_rhs(const KktSystem& system, const Discretization& disc, const ExampleData& data,
                 const BuildOptions& opts)
{
    const FESpace& V = *disc.velocity;
    const KktLayout& L = system.layout;
    PRC_REQUIRE(L.nv == V.num_dofs() && L.nq == disc.pressure->num_dofs(),
                "build_rhs: discretization does not match the system");
    const auto [obs, st] = pairing_modes(system.config.scheme, opts);
    const AssemblyOptions load{opts.exec, opts.data_degree, 1.0};
    const double c = 1.0 / std::sqrt(system.config.alpha);
    Vector rhs = Vector::Zero(L.size());
    rhs.segment(L.u(), L.nv) = assemble_load(V, data.f, st, Region::Whole, disc.reconstruction(), load);
    rhs.segment(L.z(), L.nv) =
        -c * assemble_load(V, data.ud, obs, data.observation_region, disc.reconstruction(), load);
    for (int d : V.boundary_dofs()) {
        rhs[L.u() + d] = 0.0;
        rhs[L.z() + d] = 0.0;
    }
    return rhs;
}

KktFactorization::KktFactorization(const KktSystem& system)
    : layout_(system.layout),
      config_(system.config),
      solver_(system.matrix, [layout = system.layout](int i) { return layout.block_name(i); })
{
}

SolutionFields KktFactorization::solve(const Vector& rhs) const
{
    const KktLayout& L = layout_;
    SolutionFields out;
    out.scheme = config_.scheme;
    const Vector x = solver_.solve(rhs, config_.tolerance, &out.relative_residual);
    out.u = x.segment(L.u(), L.nv);
    out.p = x.segment(L.p(), L.nq);
    out.z = x.segment(L.z(), L.nv);
    out.lambda = x.segment(L.lambda(), L.nq);
    return out;
}

SolutionFields solve(const KktSystem& system)
{
    return KktFactorization(system).solve(system.rhs);
}

void recover_control(SolutionFields& fields, const Discretization& disc, const SchemeConfig& cfg)
{
    const double c = 1.0 / std::sqrt(cfg.alpha);
    if (state_mode(cfg.scheme) == TestMode::Pi) {
        PRC_REQUIRE(disc.recon != nullptr, "recover_control: reconstruction missing");
        fields.q = -c * disc.recon->apply(fields.z);
        fields.control_space = disc.recon->target_ptr();
    } else {
        fields.q = -c * fields.z;
        fields.control_space = disc.velocity;
    }
}

SolutionFields solve_control_problem(const Discretization& disc, const SchemeConfig& cfg, const ExampleData& data,
                                     const BuildOptions& opts)
{
    const KktSystem sys = build_system(disc, cfg, data, opts);
    SolutionFields fields = solve(sys);
    recover_control(fields, disc, cfg);
    return fields;
}

namespace {

SparseMatrix stokes_matrix(const Discretization& disc, double nu, Exec exec)
{
    PRC_REQUIRE(nu > 0.0, "solve_stokes: nu must be positive");
    const FESpace& V = *disc.velocity;
    const FESpace& Q = *disc.pressure;
    const int nv = V.num_dofs();
    const int n = nv + Q.num_dofs() + 1;

    const AssemblyOptions form{exec, 8, 1.0};
    const SparseMatrix a = assemble_vector_laplacian(V, form);
    const SparseMatrix b = assemble_divergence(V, Q, form);
    const SparseMatrix bt = b.transpose();

    std::vector<std::uint8_t> fixed(static_cast<std::size_t>(n), 0);
    for (int d : V.boundary_dofs()) fixed[d] = 1;
    std::vector<Triplet> trip;
    add_block(trip, a, 0, 0, nu, fixed);
    add_block(trip, bt, 0, nv, 1.0, fixed);
    add_block(trip, b, nv, 0, 1.0, fixed);
    add_mean_constraint(trip, pressure_integrals(Q), nv, n - 1);
    for (int i = 0; i < n; ++i)
        if (fixed[i]) trip.emplace_back(i, i, 1.0);
    SparseMatrix k(n, n);
    k.setFromTriplets(trip.begin(), trip.end());
    return k;
}

UnknownNamer stokes_namer(int nv, int nq)
{
    return [nv, nq](int i) { return i < nv ? std::string("u") : i < nv + nq ? std::string("p") : "mean(p) multiplier"; };
}

}  // namespace

StokesFactorization::StokesFactorization(const Discretization& disc, double nu, double tolerance, Exec exec)
    : velocity_(disc.velocity),
      nv_(disc.velocity->num_dofs()),
      nq_(disc.pressure->num_dofs()),
      tolerance_(tolerance),
      solver_(stokes_matrix(disc, nu, exec), stokes_namer(nv_, nq_))
{
}

StokesSolution StokesFactorization::solve(const Vector& rhs) const
{
    PRC_REQUIRE(rhs.size() == nv_, "solve_stokes: load vector length mismatch");
    Vector f = Vector::Zero(nv_ + nq_ + 1);
    f.head(nv_) = rhs;
    for (int d : velocity_->boundary_dofs()) f[d] = 0.0;
    StokesSolution out;
    const Vector x = solver_.solve(f, tolerance_, &out.relative_residual);
    out.u = x.head(nv_);
    out.p = x.segment(nv_, nq_);
    return out;
}

StokesSolution solve_stokes(const Discretization& disc, double nu, const Vector& rhs, double tolerance, Exec exec)
{
    PRC_REQUIRE(rhs.size() == disc.velocity->num_dofs(), "solve_stokes: load vector length mismatch");
    return StokesFactorization(disc, nu, tolerance, exec).solve(rhs);
}

StokesSolution solve_forward_stokes(const Discretization& disc, double nu, const VectorField& f, TestMode mode,
                                    double tolerance, Exec exec)
{
    const Vector rhs = assemble_load(*disc.velocity, f, mode, Region::Whole, disc.reconstruction(), data_options(exec));
    return solve_stokes(disc, nu, rhs, tolerance, exec);
}

StreamSolution solve_stream_control_problem(MeshPtr macro_mesh, const SchemeConfig& cfg, const ExampleData& data,
                                            double tolerance, Exec exec)
{
    validate(cfg);
    PRC_REQUIRE(cfg.scheme == Scheme::ScottVogelius, "solve_stream_control_problem: only the divergence-free scheme");
    auto space = std::make_shared<const CloughTocherSpace>(std::move(macro_mesh));
    const CloughTocherSpace& S = *space;
    const Triangulation& mesh = S.mesh();
    const int n = S.num_dofs();
    const int nt = mesh.num_triangles();
    const double c = 1.0 / std::sqrt(cfg.alpha);

    using Local = Eigen::Matrix<double, 12, 12>;
    const auto local_matrices = [&](int t, Local& a, Local& m) {
        a.setZero();
        m.setZero();
        CloughTocherSpace::Values v;
        for_each_sub_quadrature_point(S, t, 4, [&](int k, const Vec2& x, double w) {
            S.eval(t, k, x, v);
            for (int i = 0; i < 12; ++i)
                for (int j = 0; j < 12; ++j) {
                    a(i, j) += w * (v.hess[i].array() * v.hess[j].array()).sum();
                    m(i, j) += w * v.grad[i].dot(v.grad[j]);
                }
        });
    };

    std::vector<std::uint8_t> fixed(static_cast<std::size_t>(2 * n), 0);
    for (int d : S.boundary_dofs()) fixed[d] = fixed[n + d] = 1;

    const SparseMatrix k = assemble_from_elements(2 * n, 2 * n, nt, exec, [&](int t, std::vector<Triplet>& out) {
        Local a, m;
        local_matrices(t, a, m);
        const auto dofs = S.element_dofs(t);
        const bool control = mesh.in_region(t, data.control_region);
        const bool observe = mesh.in_region(t, data.observation_region);
        for (int i = 0; i < 12; ++i)
            for (int j = 0; j < 12; ++j) {
                const int r = dofs[i], col = dofs[j];
                if (!fixed[r] && !fixed[col]) {
                    out.emplace_back(r, col, cfg.nu * a(i, j));
                    out.emplace_back(n + r, n + col, cfg.nu * a(i, j));
                    if (control) out.emplace_back(r, n + col, c * m(i, j));
                    if (observe) out.emplace_back(n + r, col, -c * m(i, j));
                }
            }
    });
    std::vector<Triplet> diag;
    for (int i = 0; i < 2 * n; ++i)
        if (fixed[i]) diag.emplace_back(i, i, 1.0);
    SparseMatrix id(2 * n, 2 * n);
    id.setFromTriplets(diag.begin(), diag.end());
    const SparseMatrix system = k + id;

    Vector rhs = Vector::Zero(2 * n);
    std::vector<Eigen::Matrix<double, 24, 1>> local_rhs(static_cast<std::size_t>(nt));
    const auto load_kernel = [&](int t) {
        auto& out = local_rhs[t];
        out.setZero();
        CloughTocherSpace::Values v;
        const bool observe = mesh.in_region(t, data.observation_region);
        for_each_sub_quadrature_point(S, t, 12, [&](int sub, const Vec2& x, double w) {
            S.eval(t, sub, x, v);
            const Vec2 f = data.f(x);
            const Vec2 ud = observe ? data.ud(x) : Vec2::Zero();
            for (int i = 0; i < 12; ++i) {
                const Vec2 curl(v.grad[i].y(), -v.grad[i].x());
                out[i] += w * f.dot(curl);
                out[12 + i] -= c * w * ud.dot(curl);
            }
        });
    };
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
        for (int t = 0; t < nt; ++t) load_kernel(t);
    } else {
        for (int t = 0; t < nt; ++t) load_kernel(t);
    }
    for (int t = 0; t < nt; ++t) {
        const auto dofs = S.element_dofs(t);
        for (int i = 0; i < 12; ++i) {
            rhs[dofs[i]] += local_rhs[t][i];
            rhs[n + dofs[i]] += local_rhs[t][12 + i];
        }
    }
    for (int i = 0; i < 2 * n; ++i)
        if (fixed[i]) rhs[i] = 0.0;

    // Value and derivative dofs scale with different powers of h; equilibrate
    // symmetrically so that the residual test is meaningful on fine meshes.
    Vector scale(2 * n);
    for (int i = 0; i < 2 * n; ++i) scale[i] = 1.0 / std::sqrt(std::abs(system.coeff(i, i)));
    const SparseMatrix scaled = scale.asDiagonal() * system * scale.asDiagonal();

    StreamSolution out;
    out.space = space;
    const Vector y = solve_sparse(scaled, scale.cwiseProduct(rhs), tolerance,
                                  [n](int i) { return std::string(i < n ? "psi_u" : "psi_z"); }, &out.relative_residual);
    const Vector x = scale.cwiseProduct(y);
    out.psi_u = x.head(n);
    out.psi_z = x.tail(n);
    return out;
}

}  // namespace prc
