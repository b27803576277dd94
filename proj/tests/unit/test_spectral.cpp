#include "doctest.h"
#include "hardylab/bessel.hpp"
#include "hardylab/eigensolver.hpp"
#include "hardylab/error.hpp"
#include "hardylab/hardy_spectral.hpp"
#include "support.hpp"

using namespace hardylab;
using namespace testing;

TEST_CASE("Bessel functions match the integral representation") {
    for (int n : {0, 1, 2}) {
        for (double x : {0.1, 1.0, 2.4, 5.0, 12.0, 30.0}) {
            const double oracle =
                integrate([&](double tau) { return std::cos(n * tau - x * std::sin(tau)); }, 0.0, kPi, 200) / kPi;
            CHECK(bessel_j(n, x) == doctest::Approx(oracle).epsilon(1e-12).scale(1.0));
        }
    }
}

TEST_CASE("Bessel zeros") {
    const double z01 = bessel_zero(0, 1);
    CHECK(std::abs(z01 - 2.404825557695773) <= 1e-12);
    CHECK(std::abs(bessel_j(0, z01)) <= 1e-12);
    CHECK(std::abs(bessel_zero(1, 1) - 3.8317059702075125) <= 1e-12);
    CHECK(std::abs(bessel_zero(0, 2) - 5.520078110286311) <= 1e-12);
}

TEST_CASE("identity pencil has unit eigenvalues") {
    const OperatorSet ops = assemble(Grid::build(2, 12, 12, 1.0), 0.0);
    const SparseMatrix m = diagonal_matrix(ops.mass);
    const auto rep = smallest_generalized_eigenpairs(m, m, 3);
    for (const auto& p : rep.pairs) CHECK(p.value == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("Dirichlet eigenvalue of the half-disk is j_{1,1}^2") {
    const OperatorSet ops = assemble(Grid::build(2, 192, 192, 1.0), 0.0);
    const auto rep = smallest_generalized_eigenpairs(ops.hardy, ops.mass, 1);
    const double z = bessel_zero(1, 1);
    CHECK(rel(rep.pairs[0].value, z * z) <= 0.01);
}

TEST_CASE("eigenpairs satisfy the residual contract and the bottom is simple") {
    const OperatorSet ops = assemble(Grid::build(2, 48, 48, 1.0), 0.0);
    const auto rep = smallest_generalized_eigenpairs(ops.hardy, ops.mass, 4);
    for (const auto& p : rep.pairs) {
        CHECK(p.value > 0.0);
        CHECK(p.residual <= 1e-8);
        const Field r = ops.hardy * p.vector - p.value * ops.mass.cwiseProduct(p.vector);
        CHECK(std::sqrt(r.dot(r.cwiseQuotient(ops.mass))) <= 1e-8 * std::max(p.value, 1.0));
        CHECK(p.vector.dot(ops.mass.cwiseProduct(p.vector)) == doctest::Approx(1.0).epsilon(1e-10));
    }
    CHECK(rep.pairs[1].value > 1.2 * rep.pairs[0].value);
}

TEST_CASE("half-order eigenvalue is pi^2") {
    const OperatorSet ops = assemble(Grid::build(2, 192, 192, 1.0), 0.75);
    CHECK(rel(smallest_generalized_eigenpairs(ops.hardy, ops.mass, 1).pairs[0].value, kPi * kPi) <= 0.01);
}

TEST_CASE("best Hardy constant decreases toward lambda(2)") {
    const auto est = best_hardy_constant(Grid::build(2, 64, 64, 1.0), {{64, 64}, {128, 128}, {256, 256}});
    REQUIRE(est.refinement_trend.size() == 3);
    for (const auto& p : est.refinement_trend) {
        CHECK(p.value >= 0.98);
        CHECK(p.value <= 1.6);
    }
    CHECK(trend_non_increasing(est));
    CHECK(trend_above(est, 0.98));
    CHECK(est.value == est.refinement_trend.back().value);
}

TEST_CASE("best Hardy constant for N = 3 stays above lambda(3)") {
    const auto est = best_hardy_constant(Grid::build(3, 32, 32, 1.0), {{32, 32}, {64, 64}});
    CHECK(trend_non_increasing(est));
    CHECK(trend_above(est, 2.25 - 0.02));
}

TEST_CASE("single resolution trend") {
    const auto est = best_hardy_constant(Grid::build(2, 64, 64, 1.0), {{64, 64}});
    CHECK(est.refinement_trend.size() == 1);
    CHECK(std::isfinite(est.value));
    CHECK_THROWS_AS(best_hardy_constant(Grid::build(2, 64, 64, 1.0), {{64, 64}, {32, 32}}), PreconditionError);
}

TEST_CASE("log-refinement constant") {
    CHECK(refined_log_constant(Grid::build(2, 128, 128, 1.0)).value >= 0.23);
    CHECK(refined_log_constant(Grid::build(3, 96, 96, 1.0)).value >= 0.23);
    const auto coarse = refined_log_constant(Grid::build(2, 16, 16, 1.0));
    CHECK(std::isfinite(coarse.value));
    CHECK(coarse.value >= 0.23);
    CHECK(coarse.coarse_grid_caveat);
}

TEST_CASE("weighted gradient constant: maximiser property and scale invariance") {
    const Grid g = Grid::build(2, 64, 64, 1.0);
    const auto est = tu8_constant(g);
    CHECK(std::isfinite(est.value));
    const OperatorSet critical = assemble(g, 1.0);
    const Field outer = sample(g, [](double r, double t) { return r > 0.9 ? std::sin(t) * (r - 0.9) * (1.0 - r) : 0.0; });
    CHECK(tu8_rayleigh(critical, outer) <= est.value + 1e-10);
    CHECK(tu8_rayleigh(critical, est.minimizer) == doctest::Approx(est.value).epsilon(1e-8));

    const auto wide = tu8_constant(Grid::build(2, 64, 64, 2.0));
    CHECK(wide.value == doctest::Approx(est.value).epsilon(1e-8));
}

TEST_CASE("weighted gradient constant for N = 2 rises toward lambda(2) - 1 = 0 under refinement") {
    const auto est = tu8_constant(Grid::build(2, 32, 32, 1.0), {{32, 32}, {64, 64}, {128, 128}});
    const auto& t = est.refinement_trend;
    CHECK(t[0].value < t[1].value);
    CHECK(t[1].value < t[2].value);
    CHECK(t[2].value < 0.0);
}

TEST_CASE("critical profile diagnostic") {
    const auto diag = critical_profile_diagnostic(Grid::build(2, 256, 256, 1.0), {0.2, 0.1, 0.05, 0.025});
    CHECK(diag.hardy_differences_shrink);
    CHECK(diag.dirichlet_log_slope > 0.0);
    CHECK(std::abs(diag.zero - 2.404825557695773) <= 1e-12);
    // B_{lambda,1}[e_1] = (pi/2) z^2 int_0^1 J_1(z r)^2 r dr = (pi/4) z^2 J_1(z)^2
    const double z = diag.zero;
    const double j1 = std::cyl_bessel_j(1.0, z);
    CHECK(rel(diag.rows[0].regularized_value, kPi / 4 * z * z * j1 * j1) <= 1e-3);
}

TEST_CASE("critical profile diagnostic preconditions") {
    CHECK_THROWS_AS(critical_profile_diagnostic(Grid::build(3, 32, 32, 1.0), {0.2}), PreconditionError);
    CHECK_THROWS_AS(critical_profile_diagnostic(Grid::build(2, 32, 32, 1.0), {0.1, 0.2}), PreconditionError);
    CHECK_THROWS_AS(critical_profile_diagnostic(Grid::build(2, 32, 32, 1.0), {0.01}), PreconditionError);
}
