#include "doctest.h"
#include "hardylab/elliptic.hpp"
#include "hardylab/error.hpp"
#include "hardylab/evolution.hpp"
#include "support.hpp"

using namespace hardylab;
using namespace testing;

namespace {

double mass_norm(const OperatorSet& ops, const Field& u) { return std::sqrt(mass_inner(ops, u, u)); }

}  // namespace

TEST_CASE("zero load gives zero solution") {
    const OperatorSet ops = assemble(Grid::build(2, 16, 16, 1.0), 0.5);
    const auto sol = solve_dirichlet(ops, Field::Zero(ops.size()));
    CHECK(sol.u.isZero(0.0));
}

TEST_CASE("manufactured solution x_2 (1 - r)") {
    const OperatorSet ops = assemble(Grid::build(2, 128, 128, 1.0), 0.0);
    const Field f = sample(ops.grid, [](double, double t) { return 3.0 * std::sin(t); });
    const Field exact = sample(ops.grid, [](double r, double t) { return (r - r * r) * std::sin(t); });
    const auto sol = solve_dirichlet(ops, f);
    CHECK(sol.residual <= 1e-10);
    CHECK(mass_norm(ops, sol.u - exact) <= 0.01 * mass_norm(ops, exact));
}

TEST_CASE("eigenpair load reproduces the eigenfunction") {
    const OperatorSet ops = assemble(Grid::build(2, 128, 128, 1.0), 0.75);
    const Field phi = half_order_mode(ops.grid);
    const auto sol = solve_dirichlet(ops, kPi * kPi * phi);
    CHECK(mass_norm(ops, sol.u - phi) <= 0.02 * mass_norm(ops, phi));
}

TEST_CASE("solve is linear and agrees with the factorisation") {
    const OperatorSet ops = assemble(Grid::build(3, 32, 32, 1.0), 1.5);
    const Field f1 = random_field(ops.size(), 3), f2 = random_field(ops.size(), 4);
    const SolveOptions tight{1e-12, 20000, false};
    const Field u1 = solve_dirichlet(ops, f1, tight).u, u2 = solve_dirichlet(ops, f2, tight).u;
    const Field u12 = solve_dirichlet(ops, f1 + f2, tight).u;
    CHECK((u12 - u1 - u2).norm() <= 1e-9 * u12.norm());
    const DirichletFactor factor(ops);
    const Field direct = factor.solve(ops.mass.cwiseProduct(f1));
    CHECK((direct - u1).norm() <= 1e-9 * u1.norm());
}

TEST_CASE("critical coupling needs an explicit opt-in") {
    const OperatorSet ops = assemble(Grid::build(2, 24, 24, 1.0), 1.0);
    const Field f = Field::Ones(ops.size());
    CHECK_THROWS_AS(solve_dirichlet(ops, f), PreconditionError);
    const auto sol = solve_dirichlet(ops, f, {1e-10, 20000, true});
    CHECK(sol.critical);
    CHECK(sol.residual <= 1e-10);
}

TEST_CASE("Pohozaev terms of the half-order eigenpair") {
    const OperatorSet ops = assemble(Grid::build(2, 128, 128, 1.0), 0.75);
    const Field phi = half_order_mode(ops.grid);
    CHECK(rel(quadratic_form(ops, phi, FormKind::mass), kPi / 4) <= 1e-3);
    const auto rep = pohozaev_report(ops, phi, kPi * kPi * phi);
    const double target = kPi * kPi * kPi / 4;
    CHECK(rel(rep.boundary_term, target) <= 0.02);
    CHECK(rel(rep.volume_term, target) <= 0.02);
    CHECK(rep.norm_term == 0.0);
    CHECK(std::abs(rep.residual) <= 0.02);
    CHECK(rep.load_finite);

    const auto zero = pohozaev_report(ops, Field::Zero(ops.size()), Field::Zero(ops.size()));
    CHECK(zero.boundary_term == 0.0);
    CHECK(zero.volume_term == 0.0);
    CHECK(zero.norm_term == 0.0);
    CHECK(zero.residual == 0.0);
}

TEST_CASE("Pohozaev identity for an N = 3 eigenpair") {
    const OperatorSet ops = assemble(Grid::build(3, 96, 96, 1.0), 2.0);
    const auto [mu, phi] = eigenmodes(ops, 1).front();
    const auto rep = pohozaev_report(ops, phi, mu * phi);
    CHECK(rel(rep.boundary_term, mu * quadratic_form(ops, phi, FormKind::mass)) <= 0.03);
}

TEST_CASE("trace inequality ratio") {
    const OperatorSet zero_ops = assemble(Grid::build(2, 16, 16, 1.0), 0.0);
    CHECK(trace_inequality_ratio(zero_ops, Field::Zero(zero_ops.size()), Field::Zero(zero_ops.size())) == 0.0);

    // u = x_2 (1 - r), f = 3 sin(theta): boundary pi/2 + 1/15 over B_0 + |f|^2 = pi/8 + 9 pi/4
    const double oracle = (kPi / 2 + 1.0 / 15) / (kPi / 8 + 9 * kPi / 4);
    const OperatorSet ops = assemble(Grid::build(2, 128, 128, 1.0), 0.0);
    const Field u = sample(ops.grid, [](double r, double t) { return (r - r * r) * std::sin(t); });
    const Field f = sample(ops.grid, [](double, double t) { return 3.0 * std::sin(t); });
    CHECK(rel(trace_inequality_ratio(ops, u, f), oracle) <= 0.02);

    for (int n : {64, 128}) {
        const OperatorSet eig = assemble(Grid::build(2, n, n, 1.0), 0.75);
        for (const auto& [mu, phi] : eigenmodes(eig, 3)) CHECK(trace_inequality_ratio(eig, phi, mu * phi) <= 10.0);
    }
}

TEST_CASE("ground state for N = 3, lambda = 2, alpha = 2") {
    const OperatorSet ops = assemble(Grid::build(3, 48, 48, 1.0), 2.0);
    const auto gs = ground_state(ops, 2.0);
    CHECK(gs.converged);
    CHECK(gs.I_value > 0.0);
    CHECK(gs.u.minCoeff() > 0.0);
    CHECK(gs.fixed_point_residual <= 1e-8);
    CHECK(lp_norm(ops, gs.normalized, 3.0) == doctest::Approx(1.0).epsilon(1e-12));
    // fixed point: K u = M |u| u
    const Field load = ops.mass.cwiseProduct(gs.u.cwiseAbs().cwiseProduct(gs.u));
    CHECK((ops.hardy * gs.u - load).norm() <= 1e-7 * load.norm());
}

TEST_CASE("nonlinear balance at 96 x 96") {
    const OperatorSet ops = assemble(Grid::build(3, 96, 96, 1.0), 2.0);
    const auto nb = nonlinear_balance(ops, ground_state(ops, 2.0));
    CHECK(nb.balance_factor == 0.5);
    CHECK(nb.relative_gap <= 0.05);
}

TEST_CASE("balance factor") {
    CHECK(balance_factor(3, 2.0) == 0.5);
    CHECK(balance_factor(3, 5.0) == 0.0);
    CHECK(balance_factor(3, 6.0) < 0.0);
    CHECK(balance_factor(2, 3.0) == 0.5);
}

TEST_CASE("ground state exponent preconditions") {
    const OperatorSet ops = assemble(Grid::build(3, 24, 24, 1.0), 2.0);
    CHECK_THROWS_AS(ground_state(ops, 1.0), PreconditionError);
    CHECK_THROWS_AS(ground_state(ops, 6.0), PreconditionError);
    GroundStateOptions exploratory;
    exploratory.mode = ExponentMode::exploratory;
    exploratory.max_iter = 200;
    const auto gs = ground_state(ops, 6.0, exploratory);
    const bool balance_violated = gs.converged && nonlinear_balance(ops, gs).relative_gap > 0.05;
    CHECK((!gs.converged || balance_violated));
}
