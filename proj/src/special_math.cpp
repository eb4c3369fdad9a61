#include "mnig/special_math.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace mnig {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr int kMaxIter = 100000;
constexpr double kRescaleAt = 1e200;
const double kLogRescale = std::log(kRescaleAt);

void check_domain(double nu, double x) {
  if (!std::isfinite(nu) || !std::isfinite(x) || x <= 0.0) {
    throw std::domain_error("bessel_k: requires finite order and x > 0");
  }
}

// 1/Gamma(1 + z) = sum_k kRecipGamma[k] z^k  (Abramowitz & Stegun 6.1.34).
constexpr double kRecipGamma[] = {
    1.0,
    0.5772156649015329,
    -0.6558780715202538,
    -0.0420026350340952,
    0.1665386113822915,
    -0.0421977345555443,
    -0.0096219715278770,
    0.0072189432466630,
    -0.0011651675918591,
    -0.0002152416741149,
    0.0001280502823882,
    -0.0000201348547807,
};

struct TemmeGammas {
  double gam1;   // (1/G(1-mu) - 1/G(1+mu)) / (2 mu)
  double gam2;   // (1/G(1-mu) + 1/G(1+mu)) / 2
  double gampl;  // 1/G(1+mu)
  double gammi;  // 1/G(1-mu)
};

TemmeGammas temme_gammas(double mu) {
  TemmeGammas g{};
  if (std::abs(mu) < 0.05) {
    const double m2 = mu * mu;
    // Odd and even parts of the 1/Gamma(1+z) series.
    g.gam1 = -(kRecipGamma[1] +
               m2 * (kRecipGamma[3] +
                     m2 * (kRecipGamma[5] +
                           m2 * (kRecipGamma[7] +
                                 m2 * (kRecipGamma[9] + m2 * kRecipGamma[11])))));
    g.gam2 = kRecipGamma[0] +
             m2 * (kRecipGamma[2] +
                   m2 * (kRecipGamma[4] +
                         m2 * (kRecipGamma[6] +
                               m2 * (kRecipGamma[8] + m2 * kRecipGamma[10]))));
    g.gampl = g.gam2 - mu * g.gam1;
    g.gammi = g.gam2 + mu * g.gam1;
  } else {
    g.gampl = 1.0 / std::tgamma(1.0 + mu);
    g.gammi = 1.0 / std::tgamma(1.0 - mu);
    g.gam1 = (g.gammi - g.gampl) / (2.0 * mu);
    g.gam2 = 0.5 * (g.gammi + g.gampl);
  }
  return g;
}

bool is_half_integer(double nu, int& n) {
  const double twice = 2.0 * nu;
  if (twice != std::floor(twice)) return false;
  const auto k = static_cast<long long>(twice);
  if (k % 2 == 0 || k > 2001) return false;
  n = static_cast<int>((k - 1) / 2);
  return true;
}

detail::ScaledBessel evaluate(double nu, double x) {
  check_domain(nu, x);
  nu = std::abs(nu);
  int n = 0;
  if (is_half_integer(nu, n)) return detail::bessel_k_half_integer(n, x);
  return detail::bessel_k_general(nu, x);
}

}  // namespace

namespace detail {

ScaledBessel bessel_k_general(double nu, double x) {
  check_domain(nu, x);
  nu = std::abs(nu);
  const int nl = static_cast<int>(nu + 0.5);
  const double xmu = nu - nl;
  const double xmu2 = xmu * xmu;
  const double xi = 1.0 / x;
  const double xi2 = 2.0 * xi;

  double rkmu = 0.0;
  double rk1 = 0.0;
  double log_scale = 0.0;

  if (x < 2.0) {
    // Temme's series for K_mu and K_{mu+1}, |mu| <= 1/2.
    const double x2 = 0.5 * x;
    const double pimu = std::numbers::pi * xmu;
    const double fact = std::abs(pimu) < kEps ? 1.0 : pimu / std::sin(pimu);
    double d = -std::log(x2);
    double e = xmu * d;
    const double fact2 = std::abs(e) < kEps ? 1.0 : std::sinh(e) / e;
    const TemmeGammas g = temme_gammas(xmu);
    double ff = fact * (g.gam1 * std::cosh(e) + g.gam2 * fact2 * d);
    double sum = ff;
    e = std::exp(e);
    double p = 0.5 * e / g.gampl;
    double q = 0.5 / (e * g.gammi);
    double c = 1.0;
    d = x2 * x2;
    double sum1 = p;
    for (int i = 1; i <= kMaxIter; ++i) {
      const double di = i;
      ff = (di * ff + p + q) / (di * di - xmu2);
      c *= d / di;
      p /= di - xmu;
      q /= di + xmu;
      const double del = c * ff;
      sum += del;
      sum1 += c * (p - di * ff);
      if (std::abs(del) < std::abs(sum) * kEps) break;
    }
    rkmu = sum;
    rk1 = sum1 * xi2;
  } else {
    // Steed's continued fraction; carries exp(-x) in log_scale.
    double b = 2.0 * (1.0 + x);
    double d = 1.0 / b;
    double h = d;
    double delh = d;
    double q1 = 0.0;
    double q2 = 1.0;
    const double a1 = 0.25 - xmu2;
    double q = a1;
    double c = a1;
    double a = -a1;
    double s = 1.0 + q * delh;
    for (int i = 2; i <= kMaxIter; ++i) {
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
      if (std::abs(dels / s) < kEps) break;
    }
    h = a1 * h;
    rkmu = std::sqrt(std::numbers::pi / (2.0 * x)) / s;
    rk1 = rkmu * (xmu + x + 0.5 - h) * xi;
    log_scale = -x;
  }

  // Forward recurrence K_{m+1} = K_{m-1} + (2m/x) K_m is stable for K.
  for (int i = 1; i <= nl; ++i) {
    const double next = (xmu + i) * xi2 * rk1 + rkmu;
    rkmu = rk1;
    rk1 = next;
    if (rk1 > kRescaleAt) {
      rkmu /= kRescaleAt;
      rk1 /= kRescaleAt;
      log_scale += kLogRescale;
    }
  }
  return {rkmu, log_scale};
}

ScaledBessel bessel_k_half_integer(int n, double x) {
  check_domain(n + 0.5, x);
  // K_{n+1/2}(x) = sqrt(pi/2x) e^{-x} sum_k (n+k)! / (k! (n-k)! (2x)^k)
  double term = 1.0;
  double sum = 1.0;
  double log_scale = -x;
  const double two_x = 2.0 * x;
  for (int k = 0; k < n; ++k) {
    term *= static_cast<double>(n + k + 1) * static_cast<double>(n - k) /
            (static_cast<double>(k + 1) * two_x);
    sum += term;
    if (sum > kRescaleAt) {
      sum /= kRescaleAt;
      term /= kRescaleAt;
      log_scale += kLogRescale;
    }
  }
  return {std::sqrt(std::numbers::pi / two_x) * sum, log_scale};
}

}  // namespace detail

double bessel_k(double nu, double x) {
  const auto r = evaluate(nu, x);
  return r.log_scale == 0.0 ? r.mantissa : r.mantissa * std::exp(r.log_scale);
}

double log_bessel_k(double nu, double x) {
  const auto r = evaluate(nu, x);
  return std::log(r.mantissa) + r.log_scale;
}

double bessel_k_ratio(double nu, double x) {
  return std::exp(log_bessel_k(nu + 1.0, x) - log_bessel_k(nu, x));
}

}  // namespace mnig
