#include "stcov/special.hpp"

#include <cmath>
#include <limits>

#include "stcov/errors.hpp"

namespace stcov {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// gamma1(mu) = [1/Gamma(1-mu) - 1/Gamma(1+mu)] / (2 mu) on |mu| <= 1/2.
// The direct quotient cancels near mu = 0, so small |mu| switches to the
// Taylor coefficients of 1/Gamma(1+z): gamma1 = -(a1 + a3 mu^2 + ...).
double temme_gamma1(double mu) {
  if (std::fabs(mu) > 0.05)
    return (1.0 / std::tgamma(1.0 - mu) - 1.0 / std::tgamma(1.0 + mu)) / (2.0 * mu);
  const double a1 = 0.5772156649015328606065;
  const double a3 = -0.042002635034095235529;
  const double a5 = -0.04219773455554433675;
  const double a7 = 0.007218943246663099542;
  const double a9 = -0.0002152416741149509728;
  const double m2 = mu * mu;
  return -(a1 + m2 * (a3 + m2 * (a5 + m2 * (a7 + m2 * a9))));
}

double temme_gamma2(double mu) {
  return 0.5 * (1.0 / std::tgamma(1.0 - mu) + 1.0 / std::tgamma(1.0 + mu));
}

// K_mu(x) and K_{mu+1}(x) for |mu| <= 1/2, 0 < x <= 2 (Temme 1975).
void bessel_k_small(double mu, double x, double* k_mu, double* k_mu1) {
  const double d1 = std::log(2.0 / x);
  const double sigma = mu * d1;
  const double pimu = M_PI * mu;
  const double fact = (std::fabs(pimu) < 1e-8) ? 1.0 + pimu * pimu / 6.0 : pimu / std::sin(pimu);
  const double sinhc =
      (std::fabs(sigma) < 1e-5) ? 1.0 + sigma * sigma / 6.0 : std::sinh(sigma) / sigma;

  double f = fact * (temme_gamma1(mu) * std::cosh(sigma) + temme_gamma2(mu) * d1 * sinhc);
  double p = 0.5 * std::pow(x / 2.0, -mu) * std::tgamma(1.0 + mu);
  double q = 0.5 * std::pow(x / 2.0, mu) * std::tgamma(1.0 - mu);

  const double x2_4 = 0.25 * x * x;
  double c = 1.0;
  double sum = f;
  double sum1 = p;
  for (int k = 1; k <= 500; ++k) {
    f = (k * f + p + q) / (k * k - mu * mu);
    p /= (k - mu);
    q /= (k + mu);
    c *= x2_4 / k;
    const double del = c * f;
    const double del1 = c * (p - k * f);
    sum += del;
    sum1 += del1;
    if (std::fabs(del) < std::fabs(sum) * kEps) break;
  }
  *k_mu = sum;
  *k_mu1 = sum1 * 2.0 / x;
}

// K_mu(x) and K_{mu+1}(x) for |mu| <= 1/2, x > 2, via Steed's continued
// fraction CF2 (Thompson & Barnett 1987).
void bessel_k_large(double mu, double x, double* k_mu, double* k_mu1) {
  const double mu2 = mu * mu;
  double b = 2.0 * (1.0 + x);
  double d = 1.0 / b;
  double h = d;
  double delh = d;
  double q1 = 0.0;
  double q2 = 1.0;
  const double a1 = 0.25 - mu2;
  double q = a1;
  double c = a1;
  double a = -a1;
  double s = 1.0 + q * delh;
  for (int i = 2; i <= 20000; ++i) {
    a -= 2.0 * (i - 1);
    c = -a * c / i;
    const double qnew = (q1 - b * q2) / a;
    q1 = q2;
    q2 = qnew;
    q += c * qnew;
    b += 2.0;
    d = 1.0 / (b + a * d);
    delh = (b * d - 1.0) * delh;
    h += delh;
    const double dels = q * delh;
    s += dels;
    if (std::fabs(dels / s) < kEps) break;
  }
  h = a1 * h;
  *k_mu = std::sqrt(M_PI / (2.0 * x)) * std::exp(-x) / s;
  *k_mu1 = *k_mu * (mu + x + 0.5 - h) / x;
}

}  // namespace

double bessel_k(double nu, double x) {
  if (!(x > 0.0) || !std::isfinite(x) || !(nu >= 0.0) || !std::isfinite(nu))
    throw DomainError("bessel_k: requires finite x > 0 and nu >= 0");

  const int n = static_cast<int>(nu + 0.5);
  const double mu = nu - n;  // in [-1/2, 1/2]

  double k0, k1;
  if (x <= 2.0)
    bessel_k_small(mu, x, &k0, &k1);
  else
    bessel_k_large(mu, x, &k0, &k1);

  // Upward recurrence in the order is stable for K.
  for (int j = 1; j <= n; ++j) {
    const double k2 = k0 + 2.0 * (mu + j) * k1 / x;
    k0 = k1;
    k1 = k2;
  }
  return k0;
}

double matern_correlation(double r, const MaternParams& p) {
  if (!(r >= 0.0) || !std::isfinite(r)) throw DomainError("matern_correlation: r must be >= 0");
  if (!(p.range > 0.0) || !(p.smoothness > 0.0))
    throw DomainError("matern_correlation: range and smoothness must be positive");

  const double z = r / p.range;
  if (z < 1e-12) return 1.0;

  const double nu = p.smoothness;
  if (std::fabs(nu - 0.5) < 1e-12) return std::exp(-z);
  if (std::fabs(nu - 1.5) < 1e-12) return (1.0 + z) * std::exp(-z);
  if (std::fabs(nu - 2.5) < 1e-12) return (1.0 + z + z * z / 3.0) * std::exp(-z);

  // log-scale prefactor keeps z^nu * K_nu finite for large nu.
  const double log_pref = (1.0 - nu) * M_LN2 - std::lgamma(nu) + nu * std::log(z);
  const double k = bessel_k(nu, z);
  if (k <= 0.0) return 0.0;  // underflow at very large z
  const double value = std::exp(log_pref + std::log(k));
  return std::min(value, 1.0);
}

}  // namespace stcov
