#pragma once

namespace mnig {

/// Modified Bessel function of the third kind K_nu(x) for real order and
/// x > 0. Accurate to about 1e-13 relative over x in [1e-6, 1e4].
/// Throws std::domain_error on x <= 0 or non-finite input.
double bessel_k(double nu, double x);

/// log K_nu(x). Stays finite where K_nu(x) under- or overflows.
double log_bessel_k(double nu, double x);

/// Ratio K_{nu+1}(x) / K_nu(x), evaluated in log space.
double bessel_k_ratio(double nu, double x);

namespace detail {

// K_nu(x) = mantissa * exp(log_scale).
struct ScaledBessel {
  double mantissa;
  double log_scale;
};

// General-order evaluation (Temme series for x < 2, Steed's continued
// fraction otherwise, then forward recurrence in the order). Never takes
// the half-integer shortcut.
ScaledBessel bessel_k_general(double nu, double x);

// Exact finite sum for nu = n + 1/2.
ScaledBessel bessel_k_half_integer(int n, double x);

}  // namespace detail
}  // namespace mnig
