#pragma once

namespace hardylab {

/// Bessel function of the first kind J_n(x), n >= 0, x >= 0.
/// Power series below |x| = 12, Hankel asymptotic expansion above.
double bessel_j(int order, double x);

/// k-th positive zero (k >= 1) of J_n, by sign-change scan and bisection.
double bessel_zero(int order, int k);

}  // namespace hardylab
