#include "hardylab/evolution.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <random>
#include <sstream>

#include "hardylab/eigensolver.hpp"
#include "hardylab/error.hpp"

namespace hardylab {
namespace {

using Complex = std::complex<double>;
using ComplexSparse = Eigen::SparseMatrix<Complex>;

void check_size(const OperatorSet& ops, Eigen::Index n, const char* what) {
    if (n != ops.size()) {
        std::ostringstream os;
        os << what << ": size " << n << " does not match grid (" << ops.size() << ")";
        throw PreconditionError(os.str());
    }
}

double trapezoid(const std::vector<double>& values, double dt) {
    if (values.size() < 2) return 0.0;
    double s = 0.5 * (values.front() + values.back());
    for (std::size_t n = 1; n + 1 < values.size(); ++n) s += values[n];
    return s * dt;
}

double wave_energy(const OperatorSet& ops, const Field& v, const Field& w) {
    return 0.5 * (w.dot(ops.mass.cwiseProduct(w)) + v.dot(ops.hardy * v));
}

BoundaryField real_part(const Grid& g, const ComplexField& u) { return normal_derivative(g, u.real()); }
BoundaryField imag_part(const Grid& g, const ComplexField& u) { return normal_derivative(g, u.imag()); }

template <typename Vec>
Vec load_impl(const OperatorSet& ops, const Eigen::Ref<const Vec>& h) {
    const auto& faces = ops.grid.faces();
    if (h.size() != static_cast<Eigen::Index>(faces.size())) {
        throw PreconditionError("boundary datum must have one value per face");
    }
    Vec f = Vec::Zero(ops.size());
    for (std::size_t k = 0; k < faces.size(); ++k) {
        const double c = ops.arc_coupling[static_cast<Eigen::Index>(k)];
        if (c != 0.0) f[faces[k].inner1] += c * h[static_cast<Eigen::Index>(k)];
    }
    return f;
}

template <typename Vec>
Vec flux_impl(const OperatorSet& ops, const Vec& u) {
    const auto& faces = ops.grid.faces();
    Vec out = Vec::Zero(static_cast<Eigen::Index>(faces.size()));
    for (std::size_t k = 0; k < faces.size(); ++k) {
        const double c = ops.arc_coupling[static_cast<Eigen::Index>(k)];
        if (c != 0.0 && faces[k].surface_weight > 0.0) {
            out[static_cast<Eigen::Index>(k)] = -c * u[faces[k].inner1] / faces[k].surface_weight;
        }
    }
    return out;
}

Eigen::VectorXd observation_weights(const OperatorSet& ops) {
    const auto& faces = ops.grid.faces();
    Eigen::VectorXd s(static_cast<Eigen::Index>(faces.size()));
    for (std::size_t k = 0; k < faces.size(); ++k) {
        s[static_cast<Eigen::Index>(k)] = faces[k].surface_weight * faces[k].x_dot_nu;
    }
    return s;
}

Eigen::VectorXd x_dot_nu(const OperatorSet& ops) {
    const auto& faces = ops.grid.faces();
    Eigen::VectorXd s(static_cast<Eigen::Index>(faces.size()));
    for (std::size_t k = 0; k < faces.size(); ++k) s[static_cast<Eigen::Index>(k)] = faces[k].x_dot_nu;
    return s;
}

}  // namespace

int step_count(double T, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw PreconditionError("time step dt must be positive");
    if (!(T >= dt) || !std::isfinite(T)) throw PreconditionError("final time T must be at least dt");
    const double n = std::ceil(T / dt - 1e-9);
    if (n > 1e8) throw PreconditionError("T / dt exceeds 1e8 steps");
    return static_cast<int>(n);
}

Field boundary_load(const OperatorSet& ops, const Eigen::Ref<const Eigen::VectorXd>& h) {
    return load_impl<Eigen::VectorXd>(ops, h);
}

ComplexField boundary_load(const OperatorSet& ops, const Eigen::Ref<const Eigen::VectorXcd>& h) {
    return load_impl<Eigen::VectorXcd>(ops, h);
}

Eigen::VectorXd natural_flux(const OperatorSet& ops, const Field& u) { return flux_impl(ops, u); }
Eigen::VectorXcd natural_flux(const OperatorSet& ops, const ComplexField& u) { return flux_impl(ops, u); }

WaveStepper::WaveStepper(const OperatorSet& ops, double dt) : ops_(&ops), dt_(dt) {
    if (!(dt > 0.0)) throw PreconditionError("time step dt must be positive");
    const double a = 0.25 * dt * dt;
    const SparseMatrix m = diagonal_matrix(ops.mass);
    explicit_part_ = m - a * ops.hardy;
    const SparseMatrix implicit = m + a * ops.hardy;
    implicit_part_ = std::make_shared<Eigen::SimplicialLDLT<SparseMatrix>>(implicit);
    if (implicit_part_->info() != Eigen::Success) {
        throw PreconditionError("wave step matrix M + dt^2/4 K is not positive definite");
    }
}

void WaveStepper::forward(Field& v, Field& w, const Field* load) const {
    Field rhs = explicit_part_ * v + dt_ * ops_->mass.cwiseProduct(w);
    if (load) rhs += 0.5 * dt_ * dt_ * *load;
    Field next = implicit_part_->solve(rhs);
    w = (2.0 / dt_) * (next - v) - w;
    v = std::move(next);
}

void WaveStepper::backward(Field& v, Field& w, const Field* load) const {
    Field rhs = explicit_part_ * v - dt_ * ops_->mass.cwiseProduct(w);
    if (load) rhs += 0.5 * dt_ * dt_ * *load;
    Field prev = implicit_part_->solve(rhs);
    w = (2.0 / dt_) * (v - prev) - w;
    v = std::move(prev);
}

struct SchrodingerStepper::Impl {
    ComplexSparse plus;  // M + i dt/2 K
    Eigen::SparseLU<ComplexSparse> minus_lu;
};

SchrodingerStepper::SchrodingerStepper(const OperatorSet& ops, double dt)
    : ops_(&ops), dt_(dt), impl_(std::make_shared<Impl>()) {
    if (!(dt > 0.0)) throw PreconditionError("time step dt must be positive");
    const ComplexSparse m = diagonal_matrix(ops.mass).cast<Complex>();
    const ComplexSparse k = ops.hardy.cast<Complex>();
    const Complex ia(0.0, 0.5 * dt);
    impl_->plus = m + ia * k;
    ComplexSparse minus = m - ia * k;
    minus.makeCompressed();
    impl_->minus_lu.compute(minus);
    if (impl_->minus_lu.info() != Eigen::Success) {
        throw PreconditionError("Schrodinger step matrix factorisation failed");
    }
}

ComplexField SchrodingerStepper::solve_minus(const ComplexField& b) const { return impl_->minus_lu.solve(b); }

ComplexField SchrodingerStepper::solve_plus(const ComplexField& b) const {
    const ComplexField x = impl_->minus_lu.solve(b.conjugate());
    return x.conjugate();
}

void SchrodingerStepper::forward(ComplexField& u, const ComplexField* load) const {
    ComplexField rhs = impl_->plus * u;
    if (load) rhs -= Complex(0.0, dt_) * *load;
    u = solve_minus(rhs);
}

void SchrodingerStepper::backward(ComplexField& u, const ComplexField* load) const {
    // (M + i a K) u_n = (M - i a K) u_{n+1} + i dt B h, with (M - i a K) = conj(plus) applied to u
    ComplexField rhs = (impl_->plus * u.conjugate()).conjugate();
    if (load) rhs += Complex(0.0, dt_) * *load;
    u = solve_plus(rhs);
}

double relative_drift(const std::vector<double>& series) {
    if (series.empty()) return 0.0;
    const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
    const double scale = std::max(std::abs(*lo), std::abs(*hi));
    return scale == 0.0 ? 0.0 : (*hi - *lo) / scale;
}

EvolutionTrace wave_evolve(const OperatorSet& ops, const Field& v0, const Field& v1, double T, double dt,
                           const RecordOptions& record) {
    check_size(ops, v0.size(), "wave_evolve v0");
    check_size(ops, v1.size(), "wave_evolve v1");
    const int steps = step_count(T, dt);
    EvolutionTrace tr;
    tr.lambda = ops.lambda;
    tr.T = T;
    tr.dt = T / steps;
    tr.initial_v = v0;
    tr.initial_w = v1;
    const WaveStepper stepper(ops, tr.dt);
    const Grid& g = ops.grid;

    Field v = v0, w = v1;
    auto observe = [&](int n) {
        const double t = n * tr.dt;
        tr.times.push_back(t);
        tr.energy.push_back(wave_energy(ops, v, w));
        tr.mass.push_back(v.dot(ops.mass.cwiseProduct(v)));
        if (!std::isfinite(tr.energy.back())) {
            throw ConvergenceError("wave_evolve: non-finite energy at step " + std::to_string(n), n,
                                   tr.energy.back());
        }
        if (record.flux) tr.flux.push_back(normal_derivative(g, v));
        const bool snap = n == 0 || n == steps || (record.snapshot_every > 0 && n % record.snapshot_every == 0);
        if (snap) tr.snapshots.push_back({t, v, w, {}});
    };
    observe(0);
    for (int n = 1; n <= steps; ++n) {
        stepper.forward(v, w);
        observe(n);
    }
    tr.final_v = std::move(v);
    tr.final_w = std::move(w);
    return tr;
}

EvolutionTrace schrodinger_evolve(const OperatorSet& ops, const ComplexField& u0, double T, double dt,
                                  const RecordOptions& record) {
    check_size(ops, u0.size(), "schrodinger_evolve u0");
    const int steps = step_count(T, dt);
    EvolutionTrace tr;
    tr.schrodinger = true;
    tr.lambda = ops.lambda;
    tr.T = T;
    tr.dt = T / steps;
    tr.initial_u = u0;
    const SchrodingerStepper stepper(ops, tr.dt);
    const Grid& g = ops.grid;

    ComplexField u = u0;
    auto observe = [&](int n) {
        const double t = n * tr.dt;
        tr.times.push_back(t);
        tr.mass.push_back(u.dot(ops.mass.cast<Complex>().cwiseProduct(u)).real());
        tr.energy.push_back(u.dot(ops.hardy * u).real());
        if (!std::isfinite(tr.mass.back())) {
            throw ConvergenceError("schrodinger_evolve: non-finite mass at step " + std::to_string(n), n,
                                   tr.mass.back());
        }
        if (record.flux) {
            tr.flux.push_back(real_part(g, u));
            tr.flux_imag.push_back(imag_part(g, u));
        }
        const bool snap = n == 0 || n == steps || (record.snapshot_every > 0 && n % record.snapshot_every == 0);
        if (snap) tr.snapshots.push_back({t, {}, {}, u});
    };
    observe(0);
    for (int n = 1; n <= steps; ++n) {
        stepper.forward(u);
        observe(n);
    }
    tr.final_u = std::move(u);
    return tr;
}

MultiplierReport multiplier_report(const OperatorSet& ops, const EvolutionTrace& trace) {
    if (trace.schrodinger) throw PreconditionError("multiplier_report needs a wave trace");
    if (trace.flux.size() != trace.times.size() || trace.times.empty()) {
        throw PreconditionError("multiplier_report: trace has no flux record");
    }
    const Grid& g = ops.grid;
    std::vector<double> integrand;
    integrand.reserve(trace.flux.size());
    for (const auto& b : trace.flux) integrand.push_back(boundary_quadrature(g, b, BoundaryWeight::x_dot_nu));

    const double half_dim = 0.5 * (g.dimension() - 1);
    auto cross_at = [&](const Field& v, const Field& w) {
        return mass_inner(ops, w, radial_multiplier(g, v) + half_dim * v);
    };

    MultiplierReport rep;
    rep.lhs = 0.5 * trapezoid(integrand, trace.dt);
    rep.energy_part = 0.5 * trace.T * initial_energy(ops, trace.initial_v, trace.initial_w);
    rep.cross_part = cross_at(trace.final_v, trace.final_w) - cross_at(trace.initial_v, trace.initial_w);
    const double scale = std::max({std::abs(rep.lhs), std::abs(rep.energy_part), std::abs(rep.cross_part)});
    rep.residual = scale == 0.0 ? 0.0 : (rep.lhs - rep.energy_part - rep.cross_part) / scale;
    return rep;
}

double initial_energy(const OperatorSet& ops, const Field& v0, const Field& v1) {
    return v0.dot(ops.hardy * v0) + v1.dot(ops.mass.cwiseProduct(v1));
}

double observation_integral(const OperatorSet& ops, const EvolutionTrace& trace) {
    if (trace.flux.size() != trace.times.size()) {
        throw PreconditionError("observation_integral: trace has no flux record");
    }
    std::vector<double> integrand;
    for (const auto& b : trace.flux) {
        integrand.push_back(boundary_quadrature(ops.grid, b, BoundaryWeight::x_dot_nu));
    }
    return trapezoid(integrand, trace.dt);
}

double hidden_regularity_ratio(const OperatorSet& ops, const EvolutionTrace& trace) {
    if (trace.schrodinger) throw PreconditionError("hidden_regularity_ratio needs a wave trace");
    if (trace.flux.size() != trace.times.size()) {
        throw PreconditionError("hidden_regularity_ratio: trace has no flux record");
    }
    const double energy = initial_energy(ops, trace.initial_v, trace.initial_w);
    if (energy == 0.0) return 0.0;
    std::vector<double> integrand;
    for (const auto& b : trace.flux) {
        integrand.push_back(boundary_quadrature(ops.grid, b, BoundaryWeight::abs_x_squared));
    }
    return trapezoid(integrand, trace.dt) / energy;
}

std::vector<std::pair<double, Field>> eigenmodes(const OperatorSet& ops, int k, double mass_norm2) {
    if (k < 1) throw PreconditionError("eigenmodes: k must be positive");
    if (!(mass_norm2 > 0.0)) throw PreconditionError("eigenmodes: normalisation must be positive");
    const auto report = smallest_generalized_eigenpairs(ops.hardy, ops.mass, k);
    std::vector<std::pair<double, Field>> out;
    for (const auto& p : report.pairs) out.emplace_back(p.value, std::sqrt(mass_norm2) * p.vector);
    return out;
}

std::pair<Field, Field> observation_gramian(const WaveStepper& stepper, const DirichletFactor& k_factor,
                                            const Field& v0, const Field& w0, int steps,
                                            Eigen::MatrixXd* trace) {
    const OperatorSet& ops = stepper.ops();
    check_size(ops, v0.size(), "observation_gramian v0");
    check_size(ops, w0.size(), "observation_gramian w0");
    const Eigen::VectorXd xnu = x_dot_nu(ops);
    const auto faces = static_cast<Eigen::Index>(ops.grid.faces().size());

    Eigen::MatrixXd h(steps, faces);
    Field v = v0, w = w0;
    for (int n = 0; n < steps; ++n) {
        const Field prev = v;
        stepper.forward(v, w);
        const Field mid = 0.5 * (prev + v);
        h.row(n) = xnu.cwiseProduct(natural_flux(ops, mid)).transpose();
    }

    v.setZero();
    w.setZero();
    for (int n = steps - 1; n >= 0; --n) {
        const Field load = boundary_load(ops, h.row(n).transpose());
        stepper.backward(v, w, &load);
    }
    if (trace) *trace = std::move(h);
    return {k_factor.solve(ops.mass.cwiseProduct(w)), -v};
}

double natural_observation(const WaveStepper& stepper, const Field& v0, const Field& w0, int steps) {
    const OperatorSet& ops = stepper.ops();
    const Eigen::VectorXd s = observation_weights(ops);
    double q = 0.0;
    Field v = v0, w = w0;
    for (int n = 0; n < steps; ++n) {
        const Field prev = v;
        stepper.forward(v, w);
        const Eigen::VectorXd d = natural_flux(ops, Field(0.5 * (prev + v)));
        q += s.dot(d.cwiseProduct(d));
    }
    return stepper.dt() * q;
}

namespace {

double energy_product(const OperatorSet& ops, const std::pair<Field, Field>& a, const std::pair<Field, Field>& b) {
    return a.first.dot(ops.hardy * b.first) + a.second.dot(ops.mass.cwiseProduct(b.second));
}

// Smallest Rayleigh quotient of the Gramian reached by shifted power iteration from `start`.
std::pair<double, std::pair<Field, Field>> gramian_minimum(const OperatorSet& ops, double T, double dt,
                                                           std::pair<Field, Field> start, int iterations,
                                                           unsigned seed) {
    const int steps = step_count(T, dt);
    const WaveStepper stepper(ops, T / steps);
    const DirichletFactor factor(ops);
    auto apply = [&](const std::pair<Field, Field>& a) {
        return observation_gramian(stepper, factor, a.first, a.second, steps);
    };
    auto normalise = [&](std::pair<Field, Field>& a) {
        const double n = std::sqrt(energy_product(ops, a, a));
        a.first /= n;
        a.second /= n;
    };

    // largest eigenvalue bound from a few plain power steps
    std::mt19937 rng(seed);
    std::normal_distribution<double> normal;
    std::pair<Field, Field> x{Field(ops.size()), Field(ops.size())};
    for (Eigen::Index k = 0; k < ops.size(); ++k) {
        x.first[k] = normal(rng);
        x.second[k] = normal(rng);
    }
    normalise(x);
    double top = 0.0;
    for (int it = 0; it < 12; ++it) {
        auto y = apply(x);
        top = std::max(top, energy_product(ops, y, x));
        x = std::move(y);
        normalise(x);
    }
    const double shift = 1.05 * top;

    normalise(start);
    double best = std::numeric_limits<double>::infinity();
    std::pair<Field, Field> best_vec = start;
    for (int it = 0; it < iterations; ++it) {
        const auto y = apply(start);
        const double rq = energy_product(ops, y, start);
        if (rq < best) {
            best = rq;
            best_vec = start;
        }
        start.first = shift * start.first - y.first;
        start.second = shift * start.second - y.second;
        normalise(start);
    }
    return {best, best_vec};
}

}  // namespace

ObservabilityScan observability_scan(const OperatorSet& ops, double T, double dt, const SampleSpec& spec) {
    if (!(T > 0.0)) throw PreconditionError("observability_scan: T must be positive");
    if (spec.eigenmodes < 0 || spec.random < 0 || spec.power_iterations < 0) {
        throw PreconditionError("observability_scan: sample counts must be non-negative");
    }
    const int span = std::max(spec.eigenmodes, spec.random > 0 ? std::max(spec.random_span, 1) : 0);

    std::vector<std::pair<std::string, std::pair<Field, Field>>> data;
    const Field zero = Field::Zero(ops.size());
    if (span > 0) {
        const auto modes = eigenmodes(ops, span);
        for (int k = 0; k < spec.eigenmodes; ++k) {
            data.push_back({"mode" + std::to_string(k + 1) + "_position", {modes[k].second, zero}});
            data.push_back({"mode" + std::to_string(k + 1) + "_velocity", {zero, modes[k].second}});
        }
        std::mt19937 rng(spec.seed);
        std::normal_distribution<double> normal;
        for (int s = 0; s < spec.random; ++s) {
            Field v = zero, w = zero;
            for (int k = 0; k < span; ++k) {
                v += normal(rng) * modes[k].second;
                w += normal(rng) * std::sqrt(modes[k].first) * modes[k].second;
            }
            data.push_back({"random" + std::to_string(s + 1), {v, w}});
        }
    }
    for (std::size_t s = 0; s < spec.extra.size(); ++s) {
        check_size(ops, spec.extra[s].first.size(), "observability_scan extra sample");
        check_size(ops, spec.extra[s].second.size(), "observability_scan extra sample");
        data.push_back({"extra" + std::to_string(s + 1), spec.extra[s]});
    }

    ObservabilityScan scan;
    scan.min_ratio = std::numeric_limits<double>::infinity();
    RecordOptions rec;
    for (const auto& [label, datum] : data) {
        const double energy = initial_energy(ops, datum.first, datum.second);
        if (!(energy > 0.0)) {
            scan.samples.push_back({label, 0.0, true});
            scan.notices.push_back("sample " + label + " has zero energy; skipped");
            continue;
        }
        const EvolutionTrace tr = wave_evolve(ops, datum.first, datum.second, T, dt, rec);
        const double ratio = observation_integral(ops, tr) / energy;
        scan.samples.push_back({label, ratio, false});
        if (ratio < scan.min_ratio) {
            scan.min_ratio = ratio;
            scan.worst_datum = datum;
        }
    }
    if (!std::isfinite(scan.min_ratio)) {
        throw PreconditionError("observability_scan: no sample with positive energy");
    }

    double min_all = scan.min_ratio;
    if (spec.power_iterations > 0) {
        auto [g, vec] = gramian_minimum(ops, T, dt, scan.worst_datum, spec.power_iterations, spec.seed);
        scan.gramian_min_ratio = g;
        if (g < min_all) {
            min_all = g;
            scan.worst_datum = std::move(vec);
        }
    }
    scan.D1_estimate = min_all > 0.0 ? 1.0 / min_all : std::numeric_limits<double>::infinity();
    return scan;
}

}  // namespace hardylab
