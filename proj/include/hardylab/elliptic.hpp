#pragma once

#include <memory>
#include <vector>

#include "hardylab/operators.hpp"

namespace hardylab {

struct DirichletSolution {
    Field u;
    int iterations = 0;
    double residual = 0.0;  ///< ||K_lambda u - M f|| / ||M f||
    bool critical = false;  ///< solved at lambda = lambda(N)
};

struct SolveOptions {
    double tol = 1e-10;
    int max_iter = 20000;
    /// Must be set to solve at lambda = lambda(N), where the form is only
    /// coercive in the weighted sense and CG needs many more iterations.
    bool allow_critical = false;
};

/// Solves K_lambda u = M f by incomplete-Cholesky preconditioned CG.
DirichletSolution solve_dirichlet(const OperatorSet& ops, const Field& f, const SolveOptions& options = {});

/// Factorised K_lambda for repeated solves.
class DirichletFactor {
public:
    explicit DirichletFactor(const OperatorSet& ops);
    ~DirichletFactor();
    DirichletFactor(DirichletFactor&&) noexcept;
    DirichletFactor& operator=(DirichletFactor&&) noexcept;

    /// Solves K_lambda u = rhs (rhs already multiplied by M when it is a load).
    Field solve(const Field& rhs) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct PohozaevReport {
    double boundary_term = 0.0;  ///< 1/2 int (x.nu) (du/dnu)^2
    double volume_term = 0.0;    ///< -int A u (x . grad u)
    double norm_term = 0.0;      ///< -(N-2)/2 B_lambda[u]
    double residual = 0.0;       ///< (boundary - volume - norm) / largest magnitude
    bool load_finite = true;     ///< ||f||_M finite
};

PohozaevReport pohozaev_report(const OperatorSet& ops, const Field& u, const Field& f);

/// int (du/dnu)^2 |x|^2 over (B_lambda[u] + ||f||_M^2); 0 when u and f vanish.
double trace_inequality_ratio(const OperatorSet& ops, const Field& u, const Field& f);

enum class ExponentMode { strict, exploratory };

struct GroundState {
    Field u;                 ///< solves K_lambda u = M |u|^(alpha-1) u
    Field normalized;        ///< same profile with unit L^(alpha+1) norm
    double I_value = 0.0;    ///< B_lambda of the normalised minimiser
    double alpha = 0.0;
    int iterations = 0;
    double fixed_point_residual = 0.0;
    bool converged = false;
    std::vector<double> objective_history;  ///< B[u_k] / ||u_k||^2_{L^(alpha+1)}
};

struct GroundStateOptions {
    int max_iter = 500;
    double tol = 1e-9;
    ExponentMode mode = ExponentMode::strict;
};

/// Discrete L^p norm (sum_k M_k |u_k|^p)^(1/p).
double lp_norm(const OperatorSet& ops, const Field& u, double p);

/// Normalised inverse iteration u <- K_lambda^{-1} M |u|^(alpha-1) u, renormalised in L^(alpha+1).
/// Strict mode rejects alpha >= (N+2)/(N-2) for N = 3. Exploratory mode runs anyway and
/// reports non-convergence instead of throwing.
GroundState ground_state(const OperatorSet& ops, double alpha, const GroundStateOptions& options = {});

/// N/(alpha+1) - (N-2)/2.
double balance_factor(int dimension, double alpha);

struct NonlinearBalance {
    double balance_factor = 0.0;
    double boundary_term = 0.0;
    double predicted = 0.0;  ///< balance_factor * ||u||^(alpha+1)_{L^(alpha+1)}
    double relative_gap = 0.0;
};

NonlinearBalance nonlinear_balance(const OperatorSet& ops, const GroundState& gs);

}  // namespace hardylab
