#pragma once

#include <Eigen/SparseCholesky>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hardylab/elliptic.hpp"
#include "hardylab/operators.hpp"

namespace hardylab {

/// Number of uniform steps covering [0, T] with step at most dt; throws on bad input.
int step_count(double T, double dt);

/// Load vector of a Dirichlet datum h (one value per face) imposed on the arc:
/// adds arc_coupling_f * h_f to the row of the node next to face f.
Field boundary_load(const OperatorSet& ops, const Eigen::Ref<const Eigen::VectorXd>& h);
ComplexField boundary_load(const OperatorSet& ops, const Eigen::Ref<const Eigen::VectorXcd>& h);

/// Flux through each arc face consistent with the scheme's own stiffness:
/// -arc_coupling_f * u(inner node) / surface_weight_f. Zero on other faces.
Eigen::VectorXd natural_flux(const OperatorSet& ops, const Field& u);
Eigen::VectorXcd natural_flux(const OperatorSet& ops, const ComplexField& u);

/// Implicit midpoint step for M v'' + K_lambda v = f written as v' = w.
class WaveStepper {
public:
    WaveStepper(const OperatorSet& ops, double dt);

    /// Advances (v, w) by dt. `load` is f at the half step, or null.
    void forward(Field& v, Field& w, const Field* load = nullptr) const;
    /// Exact inverse of forward with the same load.
    void backward(Field& v, Field& w, const Field* load = nullptr) const;

    double dt() const noexcept { return dt_; }
    const OperatorSet& ops() const noexcept { return *ops_; }

private:
    const OperatorSet* ops_;
    double dt_;
    SparseMatrix explicit_part_;  // M - dt^2/4 K
    std::shared_ptr<Eigen::SimplicialLDLT<SparseMatrix>> implicit_part_;
};

/// Crank-Nicolson step for M u' = i (K_lambda u - B h).
class SchrodingerStepper {
public:
    SchrodingerStepper(const OperatorSet& ops, double dt);

    /// `load` is B h at the half step, or null.
    void forward(ComplexField& u, const ComplexField* load = nullptr) const;
    void backward(ComplexField& u, const ComplexField* load = nullptr) const;

    double dt() const noexcept { return dt_; }
    const OperatorSet& ops() const noexcept { return *ops_; }

private:
    // solves (M - i a K) x = b; (M + i a K) x = b is its conjugate
    ComplexField solve_minus(const ComplexField& b) const;
    ComplexField solve_plus(const ComplexField& b) const;

    struct Impl;
    const OperatorSet* ops_;
    double dt_;
    std::shared_ptr<Impl> impl_;
};

struct RecordOptions {
    bool flux = true;
    int snapshot_every = 0;  ///< 0 keeps only the endpoints
};

struct Snapshot {
    double t;
    Field v;
    Field w;               ///< wave velocity; empty for Schrodinger
    ComplexField u;        ///< Schrodinger state; empty for wave
};

struct EvolutionTrace {
    std::vector<double> times;
    std::vector<double> energy;  ///< wave: 1/2 (w^T M w + v^T K v); Schrodinger: u^H K u
    std::vector<double> mass;    ///< v^T M v, or u^H M u
    std::vector<BoundaryField> flux;       ///< normal_derivative at each time (real part)
    std::vector<BoundaryField> flux_imag;  ///< Schrodinger only
    std::vector<Snapshot> snapshots;
    Field initial_v, initial_w, final_v, final_w;
    ComplexField initial_u, final_u;
    double lambda = 0.0;
    double T = 0.0;
    double dt = 0.0;  ///< effective step T / steps
    bool schrodinger = false;
};

/// Relative spread (max - min) / max of a positive series.
double relative_drift(const std::vector<double>& series);

EvolutionTrace wave_evolve(const OperatorSet& ops, const Field& v0, const Field& v1, double T, double dt,
                           const RecordOptions& record = {});

EvolutionTrace schrodinger_evolve(const OperatorSet& ops, const ComplexField& u0, double T, double dt,
                                  const RecordOptions& record = {});

struct MultiplierReport {
    double lhs = 0.0;          ///< 1/2 int_0^T int (x.nu) (dv/dnu)^2
    double energy_part = 0.0;  ///< T/2 (B_lambda[v0] + ||v1||^2)
    double cross_part = 0.0;   ///< [int v_t (x.grad v + (N-1)/2 v)]_0^T
    double residual = 0.0;     ///< (lhs - energy - cross) / largest magnitude
};

MultiplierReport multiplier_report(const OperatorSet& ops, const EvolutionTrace& trace);

/// int_0^T int |x|^2 (dv/dnu)^2 over B_lambda[v0] + ||v1||^2; 0 for zero data.
double hidden_regularity_ratio(const OperatorSet& ops, const EvolutionTrace& trace);

struct SampleSpec {
    int eigenmodes = 3;          ///< (phi_k, 0) and (0, phi_k) for the first k modes
    int random = 4;              ///< seeded random combinations of the first `random_span` modes
    int random_span = 12;
    unsigned seed = 42;
    int power_iterations = 0;    ///< shifted power refinement on the observation Gramian
    std::vector<std::pair<Field, Field>> extra;  ///< caller-supplied data
};

struct ObservabilitySample {
    std::string label;
    double ratio = 0.0;
    bool skipped = false;  ///< zero energy
};

struct ObservabilityScan {
    double D1_estimate = 0.0;  ///< 1 / min ratio
    double min_ratio = 0.0;
    std::optional<double> gramian_min_ratio;
    std::pair<Field, Field> worst_datum;
    std::vector<ObservabilitySample> samples;
    std::vector<std::string> notices;
};

/// Observation int_0^T int (x.nu)(dv/dnu)^2 of a wave trace (trapezoid in time).
double observation_integral(const OperatorSet& ops, const EvolutionTrace& trace);

/// Energy B_lambda[v0] + ||v1||^2 used to normalise observations.
double initial_energy(const OperatorSet& ops, const Field& v0, const Field& v1);

ObservabilityScan observability_scan(const OperatorSet& ops, double T, double dt, const SampleSpec& samples);

/// First k eigenpairs of (K_lambda, M), scaled to ||phi||_M^2 = mass_norm2 with a positive
/// largest entry. pi/4 matches sin(theta) sin(pi r)/sqrt(r) on the unit half-disk.
std::vector<std::pair<double, Field>> eigenmodes(const OperatorSet& ops, int k, double mass_norm2 = 1.0);

/// HUM Gramian applied to adjoint data a = (v0, w0): the free wave from a is observed through
/// natural_flux at half steps, the control h = (x.nu) * flux drives the wave backward from rest
/// at T, and the state (v_L, w_L) reached at t = 0 is returned as (K^-1 M w_L, -v_L).
/// Self-adjoint and positive semidefinite in the energy product v^T K v + w^T M w, with
/// <Lambda a, a>_E equal to the observation. `trace`, when given, receives h per half step.
std::pair<Field, Field> observation_gramian(const WaveStepper& stepper, const DirichletFactor& k_factor,
                                            const Field& v0, const Field& w0, int steps,
                                            Eigen::MatrixXd* trace = nullptr);

/// Discrete observation dt sum_n sum_f s_f (x.nu)_f (natural_flux of v at n+1/2)^2 of the free wave.
double natural_observation(const WaveStepper& stepper, const Field& v0, const Field& w0, int steps);

}  // namespace hardylab
