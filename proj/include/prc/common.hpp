#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <stdexcept>
#include <string>

namespace prc {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Thrown for invalid input or inconsistent objects passed to the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Linear-solver failures (singular factorization, residual not reached).
class SolverError : public Error {
public:
    using Error::Error;
};

#define PRC_REQUIRE(cond, msg)                 \
    do {                                       \
        if (!(cond)) throw ::prc::Error(msg);  \
    } while (0)

/// Execution policy for element loops. Serial is the reference path used by
/// the tests; Parallel distributes contiguous element chunks over OpenMP
/// threads and merges the per-thread results in element order.
enum class Exec { Serial, Parallel };

}  // namespace prc
