#include <random>

#include "doctest.h"
#include "hardylab/error.hpp"
#include "hardylab/hum_control.hpp"
#include "support.hpp"

using namespace hardylab;
using namespace testing;

namespace {

double energy_inner(const OperatorSet& ops, const StatePair& a, const StatePair& b) {
    return a.first.dot(ops.hardy * b.first) + a.second.dot(ops.mass.cwiseProduct(b.second));
}

StatePair random_state(const OperatorSet& ops, unsigned seed) {
    return {random_field(ops.size(), seed), random_field(ops.size(), seed + 1000)};
}

StatePair two_mode_data(const OperatorSet& ops) {
    const auto modes = eigenmodes(ops, 2, kPi / 4);
    return {modes[0].second + modes[1].second, Field::Zero(ops.size())};
}

}  // namespace

TEST_CASE("Gramian of zero data is zero") {
    const OperatorSet ops = assemble(Grid::build(2, 12, 12, 1.0), 0.75);
    const StatePair zero{Field::Zero(ops.size()), Field::Zero(ops.size())};
    const StatePair out = hum_operator(ops, zero, 1.0, 0.01);
    CHECK(out.first.isZero(0.0));
    CHECK(out.second.isZero(0.0));
}

TEST_CASE("Gramian is self-adjoint and positive in the energy product") {
    const OperatorSet ops = assemble(Grid::build(2, 48, 48, 1.0), 1.0);
    const double T = 2.5, dt = 1.0 / 200;
    for (unsigned seed = 1; seed <= 3; ++seed) {
        const StatePair a = random_state(ops, seed), b = random_state(ops, seed + 10);
        const StatePair la = hum_operator(ops, a, T, dt), lb = hum_operator(ops, b, T, dt);
        const double scale = std::sqrt(energy_inner(ops, la, la) * energy_inner(ops, b, b));
        CHECK(std::abs(energy_inner(ops, la, b) - energy_inner(ops, a, lb)) <= 1e-8 * scale);
    }
    const OperatorSet small = assemble(Grid::build(2, 16, 16, 1.0), 1.0);
    for (unsigned seed = 20; seed < 30; ++seed) {
        const StatePair a = random_state(small, seed);
        CHECK(energy_inner(small, hum_operator(small, a, T, 0.01), a) >= 0.0);
    }
}

TEST_CASE("Gramian quadratic form equals the natural observation") {
    const OperatorSet ops = assemble(Grid::build(2, 16, 16, 1.0), 0.75);
    const StatePair a = random_state(ops, 4);
    const WaveStepper stepper(ops, 0.01);
    const double obs = natural_observation(stepper, a.first, a.second, 100);
    CHECK(energy_inner(ops, hum_operator(ops, a, 1.0, 0.01), a) == doctest::Approx(obs).epsilon(1e-10));
}

TEST_CASE("zero data needs no control") {
    const OperatorSet ops = assemble(Grid::build(2, 12, 12, 1.0), 0.75);
    const StatePair zero{Field::Zero(ops.size()), Field::Zero(ops.size())};
    const auto res = hum_solve(ops, zero, 2.5, 0.01);
    CHECK(res.cg_iterations == 0);
    CHECK(res.control_trace.isZero(0.0));
    CHECK(res.converged);
}

TEST_CASE("two-mode wave control on a coarse grid") {
    const OperatorSet ops = assemble(Grid::build(2, 12, 12, 1.0), 0.75);
    const StatePair data = two_mode_data(ops);
    const double T = 2.5, dt = 0.01;
    const auto res = hum_solve(ops, data, T, dt);
    CHECK(res.converged);
    CHECK(res.cg_iterations <= 200);
    CHECK(res.cg_residual <= 1e-8);
    CHECK(res.control_cost > 0.0);
    CHECK(res.J_value == doctest::Approx(-0.5 * res.control_cost).epsilon(1e-6));
    CHECK(res.reduction_factor >= 1e4);
    CHECK(res.warnings.empty());
    CHECK(res.control_trace.rows() == res.steps);
    CHECK(res.control_trace.cols() == static_cast<Eigen::Index>(ops.grid.faces().size()));
    for (std::size_t i = 1; i < res.residual_history.size(); ++i) {
        CHECK(res.residual_history[i] <= res.residual_history[i - 1] * (1.0 + 1e-12));
    }

    const auto check = verify_control(ops, data, res, T, dt);
    CHECK(check.reduction_factor == doctest::Approx(res.reduction_factor).epsilon(1e-6));

    ControlResult idle = res;
    idle.control_trace.setZero();
    CHECK(verify_control(ops, data, idle, T, dt).reduction_factor == doctest::Approx(1.0).epsilon(1e-8));

    const auto modes = eigenmodes(ops, 3, kPi / 4);
    const StatePair other{modes[2].second, Field::Zero(ops.size())};
    CHECK(verify_control(ops, other, res, T, dt).reduction_factor < 10.0);

    const StatePair doubled{2.0 * data.first, 2.0 * data.second};
    const auto twice = hum_solve(ops, doubled, T, dt);
    CHECK((twice.control_trace - 2.0 * res.control_trace).norm() <= 1e-6 * res.control_trace.norm());
}

TEST_CASE("steering to a nonzero target") {
    const OperatorSet ops = assemble(Grid::build(2, 12, 12, 1.0), 0.75);
    const auto modes = eigenmodes(ops, 2, kPi / 4);
    const StatePair data{modes[0].second, Field::Zero(ops.size())};
    HumOptions options;
    options.target = StatePair{0.5 * modes[1].second, Field::Zero(ops.size())};
    const auto res = hum_solve(ops, data, 2.5, 0.01, options);
    CHECK(res.converged);
    CHECK(res.reduction_factor >= 1e4);
}

TEST_CASE("short horizon warns") {
    const OperatorSet ops = assemble(Grid::build(2, 12, 12, 1.0), 0.75);
    HumOptions options;
    options.max_iter = 5;
    const auto res = hum_solve(ops, two_mode_data(ops), 0.5, 0.01, options);
    CHECK(!res.warnings.empty());
    CHECK(res.warnings.front().find("2 R") != std::string::npos);
}

TEST_CASE("verification rejects a control from another grid") {
    const OperatorSet ops = assemble(Grid::build(2, 12, 12, 1.0), 0.75);
    const auto res = hum_solve(ops, two_mode_data(ops), 2.5, 0.01, {1e-8, 3, std::nullopt});
    const OperatorSet other = assemble(Grid::build(2, 16, 16, 1.0), 0.75);
    CHECK_THROWS_AS(verify_control(other, two_mode_data(other), res, 2.5, 0.01), PreconditionError);
    CHECK_THROWS_AS(verify_control(ops, two_mode_data(ops), res, 2.0, 0.01), PreconditionError);
}

TEST_CASE("Schrodinger control at long and short horizons") {
    const OperatorSet ops = assemble(Grid::build(2, 24, 24, 1.0), 0.75);
    const ComplexField u0 = eigenmodes(ops, 1, kPi / 4).front().second.cast<std::complex<double>>();
    for (double T : {0.5, 0.1}) {
        const auto res = schrodinger_hum_solve(ops, u0, T, T / 400);
        CHECK(res.converged);
        CHECK(res.schrodinger);
        CHECK(res.final_size <= 1e-4 * res.initial_size);
        CHECK(res.J_value == doctest::Approx(-0.5 * res.control_cost).epsilon(1e-6));
        const auto check = verify_schrodinger_control(ops, u0, res, T, T / 400);
        CHECK(check.final_size <= 1e-4 * check.initial_size);
    }
    const auto zero = schrodinger_hum_solve(ops, ComplexField::Zero(ops.size()), 0.1, 0.1 / 400);
    CHECK(zero.cg_iterations == 0);
    CHECK(zero.control_trace_complex.isZero(0.0));
}
