#include "hardylab/hardy_spectral.hpp"

#include <cmath>
#include <sstream>

#include "hardylab/bessel.hpp"
#include "hardylab/error.hpp"

namespace hardylab {
namespace {

constexpr int kCoarseLimit = 32;

void check_resolutions(const std::vector<Resolution>& resolutions) {
    if (resolutions.empty()) throw PreconditionError("at least one resolution is required");
    for (std::size_t i = 1; i < resolutions.size(); ++i) {
        const auto& a = resolutions[i - 1];
        const auto& b = resolutions[i];
        if (b.first < a.first || b.second < a.second || b == a) {
            throw PreconditionError("resolutions must be ascending");
        }
    }
}

template <typename PerGrid>
ConstantEstimate over_resolutions(const Grid& base, const std::vector<Resolution>& resolutions,
                                  PerGrid&& per_grid) {
    check_resolutions(resolutions);
    ConstantEstimate est;
    for (const auto& res : resolutions) {
        const Grid g = Grid::build(base.dimension(), res.first, res.second, base.radius());
        ConstantEstimate one = per_grid(g);
        est.refinement_trend.push_back({res, one.value});
        est.value = one.value;
        est.resolution = res;
        est.minimizer = std::move(one.minimizer);
        est.coarse_grid_caveat = one.coarse_grid_caveat;
    }
    return est;
}

ConstantEstimate from_pair(const Grid& g, double value, Field minimizer) {
    ConstantEstimate est;
    est.value = value;
    est.resolution = {g.n_r(), g.n_theta()};
    est.minimizer = std::move(minimizer);
    est.refinement_trend.push_back({est.resolution, value});
    est.coarse_grid_caveat = g.n_r() < kCoarseLimit || g.n_theta() < kCoarseLimit;
    return est;
}

}  // namespace

ConstantEstimate best_hardy_constant(const Grid& base, const std::vector<Resolution>& resolutions) {
    return over_resolutions(base, resolutions, [](const Grid& g) {
        const OperatorSet ops = assemble(g, 0.0);
        auto report = smallest_generalized_eigenpairs(ops.stiffness, ops.potential, 1);
        return from_pair(g, report.pairs[0].value, std::move(report.pairs[0].vector));
    });
}

bool trend_non_increasing(const ConstantEstimate& est) {
    for (std::size_t i = 1; i < est.refinement_trend.size(); ++i) {
        if (est.refinement_trend[i].value > est.refinement_trend[i - 1].value) return false;
    }
    return true;
}

bool trend_above(const ConstantEstimate& est, double lower_bound) {
    for (const auto& p : est.refinement_trend) {
        if (!(p.value >= lower_bound)) return false;
    }
    return true;
}

ConstantEstimate refined_log_constant(const Grid& grid) {
    const OperatorSet ops = assemble(grid, grid.critical_lambda());
    auto report = smallest_generalized_eigenpairs(ops.hardy, ops.log_weight, 1);
    return from_pair(grid, report.pairs[0].value, std::move(report.pairs[0].vector));
}

ConstantEstimate tu8_constant(const Grid& grid) {
    const OperatorSet ops = assemble(grid, grid.critical_lambda());
    const double r2 = grid.radius() * grid.radius();
    // smallest eigenvalue of (R^2 K_lambda - K_rad, M) is -C
    const SparseMatrix shifted = r2 * ops.hardy - ops.radial_stiffness;
    auto report = smallest_generalized_eigenpairs(shifted, ops.mass, 1);
    return from_pair(grid, -report.pairs[0].value, std::move(report.pairs[0].vector));
}

ConstantEstimate tu8_constant(const Grid& base, const std::vector<Resolution>& resolutions) {
    return over_resolutions(base, resolutions, [](const Grid& g) { return tu8_constant(g); });
}

double tu8_rayleigh(const OperatorSet& critical_ops, const Field& u) {
    const double r2 = critical_ops.grid.radius() * critical_ops.grid.radius();
    const double num = quadratic_form(critical_ops, u, FormKind::radial) -
                       r2 * quadratic_form(critical_ops, u, FormKind::hardy);
    return num / quadratic_form(critical_ops, u, FormKind::mass);
}

double relative_variation(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

Field critical_profile(const Grid& grid) {
    if (grid.dimension() != 2) throw PreconditionError("critical profile is defined on dimension-2 grids");
    const double z = bessel_zero(0, 1);
    const double radius = grid.radius();
    return sample(grid, [&](double r, double t) { return std::sin(t) * bessel_j(0, z * r / radius); });
}

CriticalProfileDiagnostic critical_profile_diagnostic(const Grid& grid, const std::vector<double>& epsilons) {
    if (grid.dimension() != 2) {
        throw PreconditionError("critical_profile_diagnostic requires a dimension-2 grid");
    }
    if (epsilons.empty()) throw PreconditionError("critical_profile_diagnostic: no epsilons given");
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
        if (!(epsilons[i] > grid.delta_r())) {
            std::ostringstream os;
            os << "epsilon " << epsilons[i] << " is below the grid resolution delta_r = " << grid.delta_r();
            throw PreconditionError(os.str());
        }
        if (i > 0 && !(epsilons[i] < epsilons[i - 1])) {
            throw PreconditionError("critical_profile_diagnostic: epsilons must be strictly descending");
        }
    }

    const OperatorSet ops = assemble(grid, grid.critical_lambda());
    const Field e1 = critical_profile(grid);
    const double regularized = regularized_hardy_form(ops, e1);

    CriticalProfileDiagnostic out;
    out.zero = bessel_zero(0, 1);
    for (double eps : epsilons) {
        const TruncatedForms t = truncated_forms(ops, e1, eps);
        out.rows.push_back({eps, t.hardy, t.dirichlet, regularized});
    }

    out.hardy_differences_shrink = true;
    for (std::size_t i = 2; i < out.rows.size(); ++i) {
        const double prev = std::abs(out.rows[i - 1].truncated_hardy - out.rows[i - 2].truncated_hardy);
        const double cur = std::abs(out.rows[i].truncated_hardy - out.rows[i - 1].truncated_hardy);
        if (!(cur < prev)) out.hardy_differences_shrink = false;
    }

    // least-squares slope of truncated_dirichlet against |log eps|
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const double n = static_cast<double>(out.rows.size());
    for (const auto& row : out.rows) {
        const double x = -std::log(row.epsilon / grid.radius());
        sx += x;
        sy += row.truncated_dirichlet;
        sxx += x * x;
        sxy += x * row.truncated_dirichlet;
    }
    const double denom = n * sxx - sx * sx;
    out.dirichlet_log_slope = denom > 0.0 ? (n * sxy - sx * sy) / denom : 0.0;
    return out;
}

}  // namespace hardylab
