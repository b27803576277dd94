#include "hardylab/hum_control.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <sstream>

#include "hardylab/error.hpp"

namespace hardylab {
namespace {

using Complex = std::complex<double>;

struct CrOutcome {
    int iterations = 0;
    double residual = 0.0;
    std::vector<double> history;
    bool converged = false;
};

// Conjugate residuals for an operator self-adjoint and positive semidefinite in `dot`, with every new
// direction orthogonalised against all previous images (generalised conjugate residuals). The residual
// is minimised over the Krylov space, so its norm is non-increasing.
template <typename Vec, typename Apply, typename Dot>
Vec conjugate_residual(const Apply& apply, const Dot& dot, const Vec& b, double tol, int max_iter,
                       CrOutcome& out) {
    Vec x = Vec::Zero(b.size());
    const double bnorm = std::sqrt(std::real(dot(b, b)));
    out.history.push_back(bnorm == 0.0 ? 0.0 : 1.0);
    if (bnorm == 0.0) {
        out.converged = true;
        return x;
    }
    std::vector<Vec> dirs, images;  // images[j] = apply(dirs[j]), unit norm and mutually orthogonal
    Vec r = b;
    for (int it = 1; it <= max_iter; ++it) {
        Vec p = r;
        Vec ap = apply(r);
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t j = 0; j < images.size(); ++j) {
                const auto c = dot(images[j], ap);
                ap -= c * images[j];
                p -= c * dirs[j];
            }
        }
        const double norm = std::sqrt(std::real(dot(ap, ap)));
        if (!(norm > 0.0)) break;
        ap /= norm;
        p /= norm;
        const auto alpha = dot(ap, r);
        x += alpha * p;
        r -= alpha * ap;
        dirs.push_back(std::move(p));
        images.push_back(std::move(ap));
        out.iterations = it;
        out.residual = std::sqrt(std::max(0.0, std::real(dot(r, r)))) / bnorm;
        out.history.push_back(out.residual);
        if (out.residual <= tol) {
            out.converged = true;
            break;
        }
    }
    return x;
}

Eigen::VectorXd stack(const StatePair& a) {
    Eigen::VectorXd s(a.first.size() + a.second.size());
    s << a.first, a.second;
    return s;
}

StatePair unstack(const Eigen::VectorXd& s) {
    const Eigen::Index n = s.size() / 2;
    return {s.head(n), s.tail(n)};
}

double wave_energy(const OperatorSet& ops, const Field& v, const Field& w) {
    return 0.5 * (w.dot(ops.mass.cwiseProduct(w)) + v.dot(ops.hardy * v));
}

void check_pair(const OperatorSet& ops, const StatePair& a, const char* what) {
    if (a.first.size() != ops.size() || a.second.size() != ops.size()) {
        std::ostringstream os;
        os << what << ": data size does not match grid (" << ops.size() << ")";
        throw PreconditionError(os.str());
    }
}

void stamp(ControlResult& res, const OperatorSet& ops, double T, int steps) {
    res.T = T;
    res.steps = steps;
    res.dt = T / steps;
    res.lambda = ops.lambda;
    res.dimension = ops.grid.dimension();
    res.n_r = ops.grid.n_r();
    res.n_theta = ops.grid.n_theta();
}

void check_stamp(const ControlResult& c, const OperatorSet& ops, double T, double dt) {
    const int steps = step_count(T, dt);
    if (c.steps != steps || std::abs(c.T - T) > 1e-12 * T || c.dimension != ops.grid.dimension() ||
        c.n_r != ops.grid.n_r() || c.n_theta != ops.grid.n_theta() || c.lambda != ops.lambda) {
        throw PreconditionError("control was computed on a different grid, lambda or time discretisation");
    }
}

void warn_short_horizon(ControlResult& res, const OperatorSet& ops, double T) {
    const double threshold = 2.0 * ops.grid.radius();
    if (T < threshold) {
        std::ostringstream os;
        os << "T = " << T << " is below 2 R = " << threshold << "; observability is not guaranteed";
        res.warnings.push_back(os.str());
    }
}

// Free backward evolution from the target at T to t = 0.
StatePair free_preimage(const WaveStepper& stepper, const StatePair& target, int steps) {
    Field v = target.first, w = target.second;
    for (int n = 0; n < steps; ++n) stepper.backward(v, w);
    return {v, w};
}

}  // namespace

StatePair hum_operator(const OperatorSet& ops, const StatePair& v_data, double T, double dt) {
    check_pair(ops, v_data, "hum_operator");
    const int steps = step_count(T, dt);
    const WaveStepper stepper(ops, T / steps);
    const DirichletFactor factor(ops);
    return observation_gramian(stepper, factor, v_data.first, v_data.second, steps);
}

ControlResult hum_solve(const OperatorSet& ops, const StatePair& initial_data, double T, double dt,
                        const HumOptions& options) {
    check_pair(ops, initial_data, "hum_solve");
    if (options.target) check_pair(ops, *options.target, "hum_solve target");
    if (!(options.tol > 0.0)) throw PreconditionError("hum_solve: tol must be positive");
    if (options.max_iter < 1) throw PreconditionError("hum_solve: max_iter must be positive");
    const int steps = step_count(T, dt);
    const WaveStepper stepper(ops, T / steps);
    const DirichletFactor factor(ops);

    ControlResult res;
    stamp(res, ops, T, steps);
    warn_short_horizon(res, ops, T);

    StatePair data = initial_data;
    if (options.target) {
        const StatePair y = free_preimage(stepper, *options.target, steps);
        data.first -= y.first;
        data.second -= y.second;
    }

    const Eigen::Index n = ops.size();
    auto apply = [&](const Eigen::VectorXd& a) {
        const auto [p, q] = observation_gramian(stepper, factor, a.head(n), a.tail(n), steps);
        return stack({p, q});
    };
    auto dot = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return a.head(n).dot(ops.hardy * b.head(n)) + a.tail(n).dot(ops.mass.cwiseProduct(b.tail(n)));
    };
    const Eigen::VectorXd rhs = stack({factor.solve(ops.mass.cwiseProduct(data.second)), -data.first});

    CrOutcome cr;
    const Eigen::VectorXd x = conjugate_residual(apply, dot, rhs, options.tol, options.max_iter, cr);
    res.cg_iterations = cr.iterations;
    res.cg_residual = cr.residual;
    res.residual_history = std::move(cr.history);
    res.converged = cr.converged;
    res.minimizer = unstack(x);

    const auto faces = static_cast<Eigen::Index>(ops.grid.faces().size());
    if (x.isZero(0.0)) {
        res.control_trace = Eigen::MatrixXd::Zero(steps, faces);
    } else {
        const auto [p, q] =
            observation_gramian(stepper, factor, res.minimizer.first, res.minimizer.second, steps, &res.control_trace);
        res.control_cost = dot(stack({p, q}), x);
        res.J_value = 0.5 * res.control_cost - dot(rhs, x);
    }
    if (!res.converged) {
        std::ostringstream os;
        os << "conjugate residuals stopped at relative residual " << res.cg_residual << " after "
           << res.cg_iterations << " iterations";
        res.warnings.push_back(os.str());
    }

    const Verification ver = verify_control(ops, initial_data, res, T, dt, options.target);
    res.initial_size = ver.initial_size;
    res.final_size = ver.final_size;
    res.reduction_factor = ver.reduction_factor;
    return res;
}

Verification verify_control(const OperatorSet& ops, const StatePair& initial_data, const ControlResult& control,
                            double T, double dt, const std::optional<StatePair>& target) {
    check_pair(ops, initial_data, "verify_control");
    if (control.schrodinger) throw PreconditionError("verify_control needs a wave control");
    check_stamp(control, ops, T, dt);
    const auto faces = static_cast<Eigen::Index>(ops.grid.faces().size());
    if (control.control_trace.rows() != control.steps || control.control_trace.cols() != faces) {
        throw PreconditionError("verify_control: control trace shape does not match the grid");
    }
    const WaveStepper stepper(ops, control.dt);

    Verification ver;
    Field v = initial_data.first, w = initial_data.second;
    StatePair reference{Field::Zero(ops.size()), Field::Zero(ops.size())};
    if (target) {
        check_pair(ops, *target, "verify_control target");
        reference = *target;
        const StatePair y = free_preimage(stepper, *target, control.steps);
        ver.initial_size = wave_energy(ops, v - y.first, w - y.second);
    } else {
        ver.initial_size = wave_energy(ops, v, w);
    }
    for (int n = 0; n < control.steps; ++n) {
        const Field load = boundary_load(ops, control.control_trace.row(n).transpose());
        stepper.forward(v, w, &load);
    }
    ver.final_size = wave_energy(ops, v - reference.first, w - reference.second);
    ver.reduction_factor = ver.final_size > 0.0 ? ver.initial_size / ver.final_size
                                                : std::numeric_limits<double>::infinity();
    return ver;
}

ControlResult schrodinger_hum_solve(const OperatorSet& ops, const ComplexField& u0, double T, double dt,
                                    double tol, int max_iter) {
    if (u0.size() != ops.size()) throw PreconditionError("schrodinger_hum_solve: data size does not match grid");
    if (!(tol > 0.0)) throw PreconditionError("schrodinger_hum_solve: tol must be positive");
    if (max_iter < 1) throw PreconditionError("schrodinger_hum_solve: max_iter must be positive");
    const int steps = step_count(T, dt);
    const SchrodingerStepper stepper(ops, T / steps);
    const DirichletFactor factor(ops);
    const auto faces = static_cast<Eigen::Index>(ops.grid.faces().size());

    Eigen::VectorXd xnu(faces);
    for (Eigen::Index f = 0; f < faces; ++f) xnu[f] = ops.grid.faces()[static_cast<std::size_t>(f)].x_dot_nu;
    const Eigen::VectorXcd mass = ops.mass.cast<Complex>();

    auto k_solve = [&](const ComplexField& b) {
        ComplexField x(b.size());
        x.real() = factor.solve(b.real());
        x.imag() = factor.solve(b.imag());
        return x;
    };
    // a -> K^-1 G a with G a = -M u_L(a); optionally records the control
    auto apply_traced = [&](const ComplexField& a, Eigen::MatrixXcd* trace) {
        Eigen::MatrixXcd h(steps, faces);
        ComplexField v = a;
        for (int n = 0; n < steps; ++n) {
            const ComplexField prev = v;
            stepper.forward(v);
            const ComplexField mid = 0.5 * (prev + v);
            h.row(n) = (Complex(0.0, -1.0) * xnu.cast<Complex>().cwiseProduct(natural_flux(ops, mid))).transpose();
        }
        ComplexField u = ComplexField::Zero(ops.size());
        for (int n = steps - 1; n >= 0; --n) {
            const ComplexField load = boundary_load(ops, h.row(n).transpose());
            stepper.backward(u, &load);
        }
        if (trace) *trace = std::move(h);
        return ComplexField(k_solve(-mass.cwiseProduct(u)));
    };
    auto apply = [&](const ComplexField& a) { return apply_traced(a, nullptr); };
    auto dot = [&](const ComplexField& a, const ComplexField& b) {
        return a.dot((ops.hardy * b.real()).cast<Complex>() + Complex(0.0, 1.0) * (ops.hardy * b.imag()).cast<Complex>());
    };

    ControlResult res;
    res.schrodinger = true;
    stamp(res, ops, T, steps);
    const ComplexField rhs = -k_solve(mass.cwiseProduct(u0));

    CrOutcome cr;
    const ComplexField x = conjugate_residual(apply, dot, rhs, tol, max_iter, cr);
    res.cg_iterations = cr.iterations;
    res.cg_residual = cr.residual;
    res.residual_history = std::move(cr.history);
    res.converged = cr.converged;
    res.minimizer_complex = x;

    if (x.isZero(0.0)) {
        res.control_trace_complex = Eigen::MatrixXcd::Zero(steps, faces);
    } else {
        const ComplexField lx = apply_traced(x, &res.control_trace_complex);
        res.control_cost = std::real(dot(x, lx));
        res.J_value = 0.5 * res.control_cost - std::real(dot(rhs, x));
    }
    res.control_trace = res.control_trace_complex.real();
    if (!res.converged) {
        std::ostringstream os;
        os << "conjugate residuals stopped at relative residual " << res.cg_residual << " after "
           << res.cg_iterations << " iterations";
        res.warnings.push_back(os.str());
    }

    const Verification ver = verify_schrodinger_control(ops, u0, res, T, dt);
    res.initial_size = ver.initial_size;
    res.final_size = ver.final_size;
    res.reduction_factor = ver.reduction_factor;
    return res;
}

Verification verify_schrodinger_control(const OperatorSet& ops, const ComplexField& u0,
                                        const ControlResult& control, double T, double dt) {
    if (u0.size() != ops.size()) throw PreconditionError("verify_schrodinger_control: data size does not match grid");
    if (!control.schrodinger) throw PreconditionError("verify_schrodinger_control needs a Schrodinger control");
    check_stamp(control, ops, T, dt);
    const auto faces = static_cast<Eigen::Index>(ops.grid.faces().size());
    if (control.control_trace_complex.rows() != control.steps || control.control_trace_complex.cols() != faces) {
        throw PreconditionError("verify_schrodinger_control: control trace shape does not match the grid");
    }
    const SchrodingerStepper stepper(ops, control.dt);
    const Eigen::VectorXcd mass = ops.mass.cast<Complex>();
    auto m_norm2 = [&](const ComplexField& u) { return std::real(u.dot(mass.cwiseProduct(u))); };

    Verification ver;
    ver.initial_size = m_norm2(u0);
    ComplexField u = u0;
    for (int n = 0; n < control.steps; ++n) {
        const ComplexField load = boundary_load(ops, control.control_trace_complex.row(n).transpose());
        stepper.forward(u, &load);
    }
    ver.final_size = m_norm2(u);
    ver.reduction_factor = ver.final_size > 0.0 ? ver.initial_size / ver.final_size
                                                : std::numeric_limits<double>::infinity();
    return ver;
}

}  // namespace hardylab
