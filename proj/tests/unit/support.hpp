#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include "hardylab/operators.hpp"

namespace testing {

inline constexpr double kPi = std::numbers::pi;

inline double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

// sin(theta) sin(pi r) / sqrt(r): first eigenfunction for N = 2, lambda = 3/4, mu = pi^2.
inline hardylab::Field half_order_mode(const hardylab::Grid& g) {
    return hardylab::sample(g, [](double r, double t) { return std::sin(t) * std::sin(kPi * r) / std::sqrt(r); });
}

inline hardylab::Field random_field(int n, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> normal;
    hardylab::Field u(n);
    for (int k = 0; k < n; ++k) u[k] = normal(rng);
    return u;
}

// Composite Gauss-Legendre (5 points per panel) on [a, b].
inline double integrate(const std::function<double(double)>& f, double a, double b, int panels = 400) {
    static constexpr double x[5] = {0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
                                    0.9061798459386640};
    static constexpr double w[5] = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                                    0.2369268850561891, 0.2369268850561891};
    const double h = (b - a) / panels;
    double sum = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double mid = a + (p + 0.5) * h;
        for (int i = 0; i < 5; ++i) sum += w[i] * f(mid + 0.5 * h * x[i]);
    }
    return 0.5 * h * sum;
}

// Cartesian gradient of a function given in the meridian plane (x_1, x_N), N = 2.
struct PlanarFunction {
    std::function<double(double, double)> u;
    std::function<double(double, double)> ux;  // d/dx_1
    std::function<double(double, double)> uy;  // d/dx_N
};

// Tensor Gauss quadrature over the unit half-disk in Cartesian coordinates: x_2 in (0, 1),
// x_1 in (-sqrt(1 - x_2^2), sqrt(1 - x_2^2)).
inline double half_disk_integral(const std::function<double(double, double)>& f, int panels = 200) {
    return integrate(
        [&](double y) {
            const double half = std::sqrt(std::max(0.0, 1.0 - y * y));
            return integrate([&](double x) { return f(x, y); }, -half, half, panels);
        },
        0.0, 1.0, panels);
}

// int |grad u + (N/2) x/|x|^2 u - e_N u / x_N|^2 + (lambda(N) - lambda) u^2 / |x|^2 for N = 2,
// straight from the Cartesian definition.
inline double cartesian_regularized_form(const PlanarFunction& p, double lambda) {
    return half_disk_integral([&](double x, double y) {
        const double r2 = x * x + y * y;
        const double u = p.u(x, y);
        const double gx = p.ux(x, y) + x / r2 * u;
        const double gy = p.uy(x, y) + y / r2 * u - u / y;
        return gx * gx + gy * gy + (1.0 - lambda) * u * u / r2;
    });
}

inline double cartesian_hardy_form(const PlanarFunction& p, double lambda) {
    return half_disk_integral([&](double x, double y) {
        const double ux = p.ux(x, y), uy = p.uy(x, y), u = p.u(x, y);
        return ux * ux + uy * uy - lambda * u * u / (x * x + y * y);
    });
}

}  // namespace testing
