#pragma once

#include "prc/common.hpp"
#include "prc/fe_space.hpp"

#include <Eigen/Core>

#include <vector>

namespace prc {

/// Reconstruction of Bernardi-Raugel functions into BDM1 by matching the two
/// linear normal moments on every edge.
///
/// Bernardi-Raugel normal traces are single valued, so the elementwise
/// matrices define a global H(div)-conforming function. Elementwise mean
/// divergence is preserved, hence discretely divergence-free inputs map to
/// pointwise divergence-free outputs.
class ReconstructionOperator {
public:
    /// Rows: local BDM1 dofs (2 per local edge); columns: local BR dofs.
    using LocalMatrix = Eigen::Matrix<double, 6, 9>;

    ReconstructionOperator(SpacePtr br, SpacePtr bdm, Exec exec = Exec::Parallel);

    const LocalMatrix& local(int t) const { return local_[t]; }
    /// Assembled num_dofs(BDM1) x num_dofs(BR) operator.
    const SparseMatrix& matrix() const { return global_; }
    Vector apply(const Vector& br_coeffs) const;

    const FESpace& source() const { return *br_; }
    const FESpace& target() const { return *bdm_; }
    const SpacePtr& source_ptr() const { return br_; }
    const SpacePtr& target_ptr() const { return bdm_; }

private:
    SpacePtr br_;
    SpacePtr bdm_;
    std::vector<LocalMatrix, Eigen::aligned_allocator<LocalMatrix>> local_;
    SparseMatrix global_;
};

ReconstructionOperator build_reconstruction(SpacePtr br, SpacePtr bdm, Exec exec = Exec::Parallel);

}  // namespace prc
