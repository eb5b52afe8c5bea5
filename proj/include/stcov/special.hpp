#pragma once

namespace stcov {

// Matern correlation parameters. Convention: the range a divides the
// distance, M(r) = 2^(1-nu)/Gamma(nu) (r/a)^nu K_nu(r/a), with no
// sqrt(2 nu) factor in the argument. With this convention the practical
// range statement exp(-0.7/0.23) ~= 0.05 holds for nu = 0.5, a = 0.23.
struct MaternParams {
  double range = 1.0;       // a > 0, distance units
  double smoothness = 0.5;  // nu > 0
};

// Modified Bessel function of the second kind K_nu(x) for nu >= 0, x > 0.
// Temme's series below x = 2, Steed's continued fraction above, then
// upward recurrence in the order; relative error <= 1e-10 over
// nu in [0, 20], x in (1e-8, 100].
double bessel_k(double nu, double x);

// Matern correlation in [0, 1]; M(0) = 1, strictly decreasing in r.
// Half-integer smoothness (0.5, 1.5, 2.5) short-circuits to the closed
// forms; below r < 1e-12 * a returns exactly 1 to avoid the 0 * inf limit.
double matern_correlation(double r, const MaternParams& p);

}  // namespace stcov
