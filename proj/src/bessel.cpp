#include "hardylab/bessel.hpp"

#include <cmath>
#include <numbers>

#include "hardylab/error.hpp"

namespace hardylab {
namespace {

constexpr double kSeriesLimit = 12.0;

double series(int n, double x) {
    const double half = 0.5 * x;
    double term = 1.0;
    for (int m = 1; m <= n; ++m) term *= half / m;
    double sum = term;
    const double q = -half * half;
    for (int k = 1; k < 200; ++k) {
        term *= q / (k * static_cast<double>(k + n));
        sum += term;
        if (std::abs(term) < 1e-17 * std::abs(sum)) break;
    }
    return sum;
}

double asymptotic(int n, double x) {
    const double mu = 4.0 * n * n;
    const double eight_x = 8.0 * x;
    double p = 1.0;
    double q = 0.0;
    double a = 1.0;
    double last = 1.0;
    for (int k = 1; k < 60; ++k) {
        const double odd = 2.0 * k - 1.0;
        a *= (mu - odd * odd) / (k * eight_x);
        if (std::abs(a) > last) break;  // asymptotic series started to diverge
        last = std::abs(a);
        // a_k enters P (k even) or Q (k odd) with alternating signs
        const int r = k % 4;
        if (r == 1) q += a;
        else if (r == 2) p -= a;
        else if (r == 3) q -= a;
        else p += a;
        if (last < 1e-17) break;
    }
    const double chi = x - (0.5 * n + 0.25) * std::numbers::pi;
    return std::sqrt(2.0 / (std::numbers::pi * x)) * (p * std::cos(chi) - q * std::sin(chi));
}

}  // namespace

double bessel_j(int order, double x) {
    if (order < 0) throw PreconditionError("bessel_j: negative order");
    if (x < 0.0) {
        // J_n(-x) = (-1)^n J_n(x)
        const double v = bessel_j(order, -x);
        return order % 2 == 0 ? v : -v;
    }
    return x < kSeriesLimit ? series(order, x) : asymptotic(order, x);
}

double bessel_zero(int order, int k) {
    if (order < 0 || k < 1) throw PreconditionError("bessel_zero: need order >= 0 and k >= 1");
    const double step = 0.05;
    double a = order == 0 ? step : static_cast<double>(order);
    double fa = bessel_j(order, a);
    int found = 0;
    for (int guard = 0; guard < 100000; ++guard) {
        const double b = a + step;
        const double fb = bessel_j(order, b);
        if (fa == 0.0 || fa * fb < 0.0) {
            if (++found == k) {
                if (fa == 0.0) return a;
                double lo = a, hi = b, flo = fa;
                for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    const double fm = bessel_j(order, mid);
                    if (fm == 0.0) return mid;
                    if ((fm < 0.0) == (flo < 0.0)) {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                }
                return 0.5 * (lo + hi);
            }
        }
        a = b;
        fa = fb;
    }
    throw PreconditionError("bessel_zero: zero not bracketed");
}

}  // namespace hardylab
