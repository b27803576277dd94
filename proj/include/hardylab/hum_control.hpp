#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hardylab/evolution.hpp"

namespace hardylab {

using StatePair = std::pair<Field, Field>;  ///< (position, velocity)

struct ControlResult {
    Eigen::MatrixXd control_trace;           ///< h at each half step (rows) on each face (columns)
    Eigen::MatrixXcd control_trace_complex;  ///< Schrodinger control; empty for the wave
    StatePair minimizer;                     ///< adjoint data of the minimiser (wave)
    ComplexField minimizer_complex;          ///< adjoint datum (Schrodinger)
    int cg_iterations = 0;
    double cg_residual = 0.0;  ///< relative residual in the solver's inner product
    std::vector<double> residual_history;
    double J_value = 0.0;       ///< functional at the minimiser, equal to -control_cost / 2
    double control_cost = 0.0;  ///< observation of the minimiser = int (x.nu)^-1 h^2
    double initial_size = 0.0;  ///< energy (wave) or mass (Schrodinger) of the data being controlled
    double final_size = 0.0;    ///< same quantity after the verification run
    double reduction_factor = 0.0;
    bool converged = false;
    bool schrodinger = false;
    double T = 0.0;
    double dt = 0.0;
    int steps = 0;
    double lambda = 0.0;
    int dimension = 0, n_r = 0, n_theta = 0;
    std::vector<std::string> warnings;
};

/// The HUM operator Lambda on adjoint data (see observation_gramian).
StatePair hum_operator(const OperatorSet& ops, const StatePair& v_data, double T, double dt);

struct HumOptions {
    double tol = 1e-8;
    int max_iter = 400;
    /// Reach (position, velocity) = target at T instead of rest.
    std::optional<StatePair> target;
};

/// Minimises J(a) = 1/2 <Lambda a, a>_E - <b, a>_E by conjugate residuals in the energy product and
/// runs the verification. Non-convergence is reported through `converged`, not thrown.
ControlResult hum_solve(const OperatorSet& ops, const StatePair& initial_data, double T, double dt,
                        const HumOptions& options = {});

struct Verification {
    double initial_size = 0.0;
    double final_size = 0.0;
    double reduction_factor = 0.0;  ///< initial_size / final_size
};

/// Forward controlled run from `initial_data` with the control trace injected on the arc.
/// With a target, sizes are measured on the distance to the free solution ending at the target.
Verification verify_control(const OperatorSet& ops, const StatePair& initial_data, const ControlResult& control,
                            double T, double dt, const std::optional<StatePair>& target = std::nullopt);

/// Same construction for i u_t - Delta u - lambda u/|x|^2 = 0 (M u' = i K u) with
/// h = -i (x.nu) d(v)/dnu; conjugate residuals in the K-inner product.
ControlResult schrodinger_hum_solve(const OperatorSet& ops, const ComplexField& u0, double T, double dt,
                                    double tol = 1e-8, int max_iter = 400);

/// Final mass over initial mass is 1 / reduction_factor.
Verification verify_schrodinger_control(const OperatorSet& ops, const ComplexField& u0,
                                        const ControlResult& control, double T, double dt);

}  // namespace hardylab
