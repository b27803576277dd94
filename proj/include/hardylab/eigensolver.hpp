#pragma once

#include <optional>
#include <vector>

#include "hardylab/operators.hpp"

namespace hardylab {

struct EigenResult {
    double value = 0.0;
    Field vector;          ///< B-normalised: v^T B v = 1
    double residual = 0.0; ///< ||A v - value B v||_{B^-1} / max(|value|, 1)
};

struct EigenOptions {
    double tol = 1e-10;
    int max_iter = 2000;
    int guard = 6;  ///< extra block vectors beyond k
    /// Shift for the factorisation A - shift B. When unset, 0 is tried and
    /// lowered until the shifted matrix has no negative pivots (inertia check).
    std::optional<double> shift;
    unsigned seed = 42;
};

struct EigenReport {
    std::vector<EigenResult> pairs;
    int iterations = 0;
    double shift = 0.0;
};

/// k smallest eigenpairs of the symmetric pencil (A, B), B positive definite,
/// by shift-invert block subspace iteration with Rayleigh-Ritz projection.
/// Throws ConvergenceError when max_iter is exhausted.
EigenReport smallest_generalized_eigenpairs(const SparseMatrix& A, const SparseMatrix& B, int k,
                                            const EigenOptions& options = {});

/// Convenience overload for a diagonal B.
EigenReport smallest_generalized_eigenpairs(const SparseMatrix& A, const Eigen::VectorXd& b_diag,
                                            int k, const EigenOptions& options = {});

SparseMatrix diagonal_matrix(const Eigen::VectorXd& d);

}  // namespace hardylab
