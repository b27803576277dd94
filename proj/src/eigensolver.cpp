#include "hardylab/eigensolver.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <random>

#include "hardylab/error.hpp"

namespace hardylab {
namespace {

using Ldlt = Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>;
using Llt = Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>;

// Number of negative pivots of A - shift B, or -1 when the factorisation breaks down.
int negative_pivots(Ldlt& solver, const SparseMatrix& A, const SparseMatrix& B, double shift) {
    SparseMatrix shifted = A - shift * B;
    solver.compute(shifted);
    if (solver.info() != Eigen::Success) return -1;
    const auto& d = solver.vectorD();
    if (!d.allFinite() || (d.array() == 0.0).any()) return -1;
    return static_cast<int>((d.array() < 0.0).count());
}

// Chooses a shift strictly below the spectrum and leaves `solver` factorised at it.
double place_shift(Ldlt& solver, const SparseMatrix& A, const SparseMatrix& B) {
    double shift = 0.0;
    if (negative_pivots(solver, A, B, shift) == 0) return shift;

    double step = 1.0;
    double upper = shift;
    while (true) {
        shift = upper - step;
        if (negative_pivots(solver, A, B, shift) == 0) break;
        upper = shift;
        step *= 2.0;
        if (step > 1e300) throw PreconditionError("eigen solver: could not find a shift below the spectrum");
    }
    // Narrow [shift, upper) so inverse iteration contracts quickly; upper always has
    // at least one eigenvalue below it.
    double lower = shift;
    for (int it = 0; it < 8; ++it) {
        const double mid = 0.5 * (lower + upper);
        if (negative_pivots(solver, A, B, mid) == 0) lower = mid;
        else upper = mid;
    }
    // back off by a tenth of the bracket to stay clear of the first eigenvalue
    shift = lower - 0.1 * (upper - lower);
    if (negative_pivots(solver, A, B, shift) != 0) throw PreconditionError("eigen solver: shift placement failed");
    return shift;
}

void b_orthonormalize(Eigen::MatrixXd& X, const SparseMatrix& B) {
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
        for (int pass = 0; pass < 2; ++pass) {
            const Eigen::VectorXd bx = B * X.col(c);
            const Eigen::VectorXd coeffs = X.leftCols(c).transpose() * bx;
            X.col(c) -= X.leftCols(c) * coeffs;
        }
        const double nrm = std::sqrt(X.col(c).dot(B * X.col(c)));
        X.col(c) /= nrm;
    }
}

}  // namespace

SparseMatrix diagonal_matrix(const Eigen::VectorXd& d) {
    SparseMatrix m(d.size(), d.size());
    m.reserve(Eigen::VectorXi::Constant(d.size(), 1));
    for (Eigen::Index i = 0; i < d.size(); ++i) m.insert(i, i) = d[i];
    m.makeCompressed();
    return m;
}

EigenReport smallest_generalized_eigenpairs(const SparseMatrix& A, const Eigen::VectorXd& b_diag,
                                            int k, const EigenOptions& options) {
    return smallest_generalized_eigenpairs(A, diagonal_matrix(b_diag), k, options);
}

EigenReport smallest_generalized_eigenpairs(const SparseMatrix& A, const SparseMatrix& B, int k,
                                            const EigenOptions& options) {
    const Eigen::Index n = A.rows();
    if (A.cols() != n || B.rows() != n || B.cols() != n) {
        throw PreconditionError("eigen solver: pencil matrices have mismatched sizes");
    }
    if (k < 1 || k > n) throw PreconditionError("eigen solver: need 1 <= k <= n");

    Llt b_factor(B);
    if (b_factor.info() != Eigen::Success) {
        throw PreconditionError("eigen solver: B is not positive definite");
    }

    Ldlt solver;
    double shift = 0.0;
    if (options.shift) {
        shift = *options.shift;
        if (negative_pivots(solver, A, B, shift) < 0) {
            throw PreconditionError("eigen solver: A - shift B is singular");
        }
    } else {
        shift = place_shift(solver, A, B);
    }

    const Eigen::Index block = std::min<Eigen::Index>(n, k + std::max(options.guard, k));
    std::mt19937 rng(options.seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Eigen::MatrixXd X(n, block);
    for (Eigen::Index c = 0; c < block; ++c)
        for (Eigen::Index i = 0; i < n; ++i) X(i, c) = dist(rng);
    b_orthonormalize(X, B);

    EigenReport report;
    report.shift = shift;
    Eigen::VectorXd ritz;
    std::vector<double> residuals(static_cast<std::size_t>(k), 0.0);
    double worst = 0.0;

    for (int iter = 1; iter <= options.max_iter; ++iter) {
        Eigen::MatrixXd BX = B * X;
        Eigen::MatrixXd Y(n, block);
        for (Eigen::Index c = 0; c < block; ++c) Y.col(c) = solver.solve(BX.col(c));

        Eigen::MatrixXd AY = A * Y;
        Eigen::MatrixXd BY = B * Y;
        Eigen::MatrixXd a_hat = Y.transpose() * AY;
        Eigen::MatrixXd b_hat = Y.transpose() * BY;
        a_hat = 0.5 * (a_hat + a_hat.transpose()).eval();
        b_hat = 0.5 * (b_hat + b_hat.transpose()).eval();
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> small(a_hat, b_hat);
        if (small.info() != Eigen::Success) {
            throw ConvergenceError("eigen solver: Rayleigh-Ritz projection failed", iter, worst);
        }
        ritz = small.eigenvalues();
        const Eigen::MatrixXd& C = small.eigenvectors();
        X = Y * C;
        Eigen::MatrixXd AX = AY * C;
        Eigen::MatrixXd BXn = BY * C;

        worst = 0.0;
        for (int i = 0; i < k; ++i) {
            Eigen::VectorXd r = AX.col(i) - ritz[i] * BXn.col(i);
            Eigen::VectorXd br = b_factor.solve(r);
            const double res = std::sqrt(std::max(0.0, r.dot(br))) / std::max(std::abs(ritz[i]), 1.0);
            residuals[static_cast<std::size_t>(i)] = res;
            worst = std::max(worst, res);
        }
        report.iterations = iter;
        if (worst <= options.tol) break;
        if (iter == options.max_iter) {
            throw ConvergenceError("eigen solver did not reach tolerance", iter, worst);
        }
    }

    for (int i = 0; i < k; ++i) {
        EigenResult res;
        res.value = ritz[i];
        res.vector = X.col(i);
        const double nrm = std::sqrt(res.vector.dot(B * res.vector));
        res.vector /= nrm;
        // fix the sign so that the entry of largest magnitude is positive
        Eigen::Index arg = 0;
        res.vector.cwiseAbs().maxCoeff(&arg);
        if (res.vector[arg] < 0.0) res.vector = -res.vector;
        res.residual = residuals[static_cast<std::size_t>(i)];
        report.pairs.push_back(std::move(res));
    }
    return report;
}

}  // namespace hardylab
