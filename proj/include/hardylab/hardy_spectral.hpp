#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "hardylab/eigensolver.hpp"

namespace hardylab {

using Resolution = std::pair<int, int>;  // (n_r, n_theta)

struct TrendPoint {
    Resolution resolution;
    double value;
};

/// A discrete constant together with how it moves under refinement.
/// The extremal constants here are typically not attained, so the trend
/// is as important as the finest value.
struct ConstantEstimate {
    double value = 0.0;
    Resolution resolution{};
    Field minimizer;
    std::vector<TrendPoint> refinement_trend;
    bool coarse_grid_caveat = false;
};

/// Hardy ratio min u^T K u / u^T P u at each resolution on the domain of `base`.
/// `resolutions` must be ascending.
ConstantEstimate best_hardy_constant(const Grid& base, const std::vector<Resolution>& resolutions);

/// Whether a trend is non-increasing and stays above `lower_bound`.
bool trend_non_increasing(const ConstantEstimate& est);
bool trend_above(const ConstantEstimate& est, double lower_bound);

/// min u^T K_{lambda(N)} u / u^T W_log u, the coefficient of the logarithmic remainder term.
ConstantEstimate refined_log_constant(const Grid& grid);

/// Largest eigenvalue of (K_rad - R^2 K_{lambda(N)}, M): the smallest C for which the weighted
/// gradient inequality holds on the grid.
ConstantEstimate tu8_constant(const Grid& grid);
ConstantEstimate tu8_constant(const Grid& base, const std::vector<Resolution>& resolutions);

/// (u^T K_rad u - R^2 u^T K_{lambda(N)} u) / u^T M u for ops assembled at lambda(N).
double tu8_rayleigh(const OperatorSet& critical_ops, const Field& u);

/// |a - b| / max(|a|, |b|); 0 when both vanish.
double relative_variation(double a, double b);

struct CriticalProfileRow {
    double epsilon;
    double truncated_hardy;
    double truncated_dirichlet;
    double regularized_value;
};

struct CriticalProfileDiagnostic {
    std::vector<CriticalProfileRow> rows;
    double zero = 0.0;            ///< first positive zero of J_0
    double dirichlet_log_slope;   ///< least-squares slope of truncated_dirichlet vs |log eps|
    bool hardy_differences_shrink;
};

/// Critical profile e_1 = sin(theta) J_0(z_{0,1} r / R) on a dimension-2 grid: truncated Hardy and
/// Dirichlet energies over r >= eps, and the regularized form on the whole grid.
/// `epsilons` must be strictly descending and larger than delta_r.
CriticalProfileDiagnostic critical_profile_diagnostic(const Grid& grid, const std::vector<double>& epsilons);

/// Samples of e_1 on a dimension-2 grid.
Field critical_profile(const Grid& grid);

}  // namespace hardylab
