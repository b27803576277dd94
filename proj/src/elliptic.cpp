#include "hardylab/elliptic.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "hardylab/error.hpp"

namespace hardylab {
namespace {

void check_field(const OperatorSet& ops, const Field& u, const char* what) {
    if (u.size() != ops.size()) {
        std::ostringstream os;
        os << what << ": field size " << u.size() << " does not match grid (" << ops.size() << ")";
        throw PreconditionError(os.str());
    }
}

Field power_nonlinearity(const Field& u, double alpha) {
    return u.unaryExpr([alpha](double x) { return std::pow(std::abs(x), alpha - 1.0) * x; });
}

Field positive_guess(const Grid& g) {
    const double R = g.radius();
    return sample(g, [&](double r, double t) {
        const double height = g.dimension() == 2 ? std::sin(t) : std::cos(t);
        return r * height * (R - r) + 1e-3 * r * (R - r);
    });
}

}  // namespace

DirichletSolution solve_dirichlet(const OperatorSet& ops, const Field& f, const SolveOptions& options) {
    check_field(ops, f, "solve_dirichlet");
    if (!f.allFinite()) throw PreconditionError("solve_dirichlet: load has non-finite entries");
    const bool critical = ops.lambda >= ops.grid.critical_lambda();
    if (critical && !options.allow_critical) {
        throw PreconditionError(
            "solve_dirichlet at lambda = lambda(N) requires allow_critical (form is not coercive in H^1)");
    }

    DirichletSolution out;
    out.critical = critical;
    const Field rhs = ops.mass.cwiseProduct(f);
    if (rhs.squaredNorm() == 0.0) {
        out.u = Field::Zero(ops.size());
        return out;
    }

    Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::IncompleteCholesky<double>> cg;
    cg.setTolerance(options.tol);
    cg.setMaxIterations(options.max_iter);
    cg.compute(ops.hardy);
    if (cg.info() != Eigen::Success) throw PreconditionError("solve_dirichlet: preconditioner setup failed");
    out.u = cg.solve(rhs);
    out.iterations = static_cast<int>(cg.iterations());
    out.residual = (ops.hardy * out.u - rhs).norm() / rhs.norm();
    if (out.residual > options.tol) {
        throw ConvergenceError("solve_dirichlet: CG did not converge", out.iterations, out.residual);
    }
    return out;
}

struct DirichletFactor::Impl {
    Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
};

DirichletFactor::DirichletFactor(const OperatorSet& ops) : impl_(std::make_unique<Impl>()) {
    impl_->ldlt.compute(ops.hardy);
    if (impl_->ldlt.info() != Eigen::Success) {
        throw PreconditionError("DirichletFactor: K_lambda factorisation failed");
    }
}

DirichletFactor::~DirichletFactor() = default;
DirichletFactor::DirichletFactor(DirichletFactor&&) noexcept = default;
DirichletFactor& DirichletFactor::operator=(DirichletFactor&&) noexcept = default;

Field DirichletFactor::solve(const Field& rhs) const { return impl_->ldlt.solve(rhs); }

PohozaevReport pohozaev_report(const OperatorSet& ops, const Field& u, const Field& f) {
    check_field(ops, u, "pohozaev_report");
    check_field(ops, f, "pohozaev_report");
    const Grid& g = ops.grid;
    PohozaevReport rep;
    rep.load_finite = std::isfinite(quadratic_form(ops, f, FormKind::mass));
    rep.boundary_term = 0.5 * boundary_quadrature(g, normal_derivative(g, u), BoundaryWeight::x_dot_nu);
    rep.volume_term = -mass_inner(ops, f, radial_multiplier(g, u));
    rep.norm_term = -0.5 * (g.dimension() - 2) * quadratic_form(ops, u, FormKind::hardy);
    const double scale =
        std::max({std::abs(rep.boundary_term), std::abs(rep.volume_term), std::abs(rep.norm_term)});
    rep.residual = scale == 0.0 ? 0.0 : (rep.boundary_term - rep.volume_term - rep.norm_term) / scale;
    return rep;
}

double trace_inequality_ratio(const OperatorSet& ops, const Field& u, const Field& f) {
    check_field(ops, u, "trace_inequality_ratio");
    check_field(ops, f, "trace_inequality_ratio");
    const double denom = quadratic_form(ops, u, FormKind::hardy) + quadratic_form(ops, f, FormKind::mass);
    if (denom == 0.0) return 0.0;
    const Grid& g = ops.grid;
    return boundary_quadrature(g, normal_derivative(g, u), BoundaryWeight::abs_x_squared) / denom;
}

double lp_norm(const OperatorSet& ops, const Field& u, double p) {
    check_field(ops, u, "lp_norm");
    double s = 0.0;
    for (Eigen::Index k = 0; k < u.size(); ++k) s += ops.mass[k] * std::pow(std::abs(u[k]), p);
    return std::pow(s, 1.0 / p);
}

double balance_factor(int dimension, double alpha) {
    return dimension / (alpha + 1.0) - 0.5 * (dimension - 2);
}

GroundState ground_state(const OperatorSet& ops, double alpha, const GroundStateOptions& options) {
    const Grid& g = ops.grid;
    if (!(alpha > 1.0)) {
        throw PreconditionError("ground_state: alpha must exceed 1 (alpha = 1 is the linear eigenproblem)");
    }
    if (g.dimension() == 3 && options.mode == ExponentMode::strict) {
        const double critical = (g.dimension() + 2.0) / (g.dimension() - 2.0);
        if (alpha >= critical) {
            std::ostringstream os;
            os << "ground_state: alpha = " << alpha << " >= (N+2)/(N-2) = " << critical
               << "; no nontrivial solutions exist on star-shaped domains in this regime"
                  " (use exploratory mode to observe the iteration)";
            throw PreconditionError(os.str());
        }
    }
    if (options.max_iter < 1) throw PreconditionError("ground_state: max_iter must be positive");

    const DirichletFactor factor(ops);
    const double p = alpha + 1.0;

    GroundState gs;
    gs.alpha = alpha;
    Field u = positive_guess(g);
    u /= lp_norm(ops, u, p);
    bool restarted = false;

    for (int it = 1; it <= options.max_iter; ++it) {
        gs.objective_history.push_back(u.dot(ops.hardy * u));
        const Field w = factor.solve(ops.mass.cwiseProduct(power_nonlinearity(u, alpha)));
        const double nw = w.allFinite() ? lp_norm(ops, w, p) : 0.0;
        if (!(nw > 0.0) || !std::isfinite(nw)) {
            if (restarted) {
                gs.iterations = it;
                gs.converged = false;
                gs.fixed_point_residual = std::numeric_limits<double>::infinity();
                if (options.mode == ExponentMode::strict) {
                    throw ConvergenceError("ground_state: iteration collapsed to zero", it, gs.fixed_point_residual);
                }
                return gs;
            }
            restarted = true;
            u = positive_guess(g);
            u /= lp_norm(ops, u, p);
            continue;
        }
        u = w / nw;

        const double I = u.dot(ops.hardy * u);
        const Field load = I * ops.mass.cwiseProduct(power_nonlinearity(u, alpha));
        gs.fixed_point_residual = (ops.hardy * u - load).norm() / load.norm();
        gs.iterations = it;
        gs.I_value = I;
        if (gs.fixed_point_residual <= options.tol) {
            gs.converged = true;
            break;
        }
    }

    gs.normalized = u;
    gs.u = std::pow(gs.I_value, 1.0 / (alpha - 1.0)) * u;
    if (!gs.converged && options.mode == ExponentMode::strict) {
        throw ConvergenceError("ground_state: fixed point iteration did not converge", gs.iterations,
                               gs.fixed_point_residual);
    }
    return gs;
}

NonlinearBalance nonlinear_balance(const OperatorSet& ops, const GroundState& gs) {
    if (!gs.converged) throw PreconditionError("nonlinear_balance: ground state is not converged");
    check_field(ops, gs.u, "nonlinear_balance");
    const Grid& g = ops.grid;
    NonlinearBalance nb;
    nb.balance_factor = balance_factor(g.dimension(), gs.alpha);
    const double p = gs.alpha + 1.0;
    nb.predicted = nb.balance_factor * std::pow(lp_norm(ops, gs.u, p), p);
    nb.boundary_term = 0.5 * boundary_quadrature(g, normal_derivative(g, gs.u), BoundaryWeight::x_dot_nu);
    nb.relative_gap = nb.predicted != 0.0 ? std::abs(nb.boundary_term - nb.predicted) / std::abs(nb.predicted)
                                          : std::numeric_limits<double>::infinity();
    return nb;
}

}  // namespace hardylab
