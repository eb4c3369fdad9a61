#include "mnig/distributions.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>

#include "mnig/special_math.hpp"

namespace mnig {
namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::domain_error(what);
}

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

Eigen::LLT<Eigen::MatrixXd> spd_factor(const Eigen::Ref<const Eigen::MatrixXd>& m,
                                       const char* what) {
  require(m.rows() == m.cols() && m.rows() > 0, what);
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  require(llt.info() == Eigen::Success, what);
  return llt;
}

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m) {
  const auto llt = spd_factor(m, "matrix inverse: not positive definite");
  Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
  return 0.5 * (inv + inv.transpose());
}

// Marsaglia & Tsang, shape >= 1.
double gamma_mt(double shape, RngStream& rng) {
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = 0.0;
    double v = 0.0;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double standard_normal_upper_tail(double a) { return 0.5 * std::erfc(a / std::numbers::sqrt2); }

}  // namespace

void GigParams::validate() const {
  require(std::isfinite(lambda), "GIG: order must be finite");
  require(positive_finite(chi) && positive_finite(psi), "GIG: chi and psi must be positive");
}

void WishartParams::validate() const {
  const auto n = static_cast<double>(rate.rows());
  require(std::isfinite(q) && q > 0.5 * (n - 1.0), "Wishart: q must exceed (n-1)/2");
  spd_factor(rate, "Wishart: rate matrix not positive definite");
}

void RankOneMgigParams::validate() const {
  const auto n = a.rows();
  require(z.size() == n, "MGIG: z has wrong dimension");
  require(z.allFinite() && z.squaredNorm() > 0.0, "MGIG: z must be nonzero");
  require(positive_finite(b), "MGIG: b must be positive");
  require(std::isfinite(q) && q > 0.5 * (static_cast<double>(n) - 1.0),
          "MGIG: q must exceed (n-1)/2");
  spd_factor(a, "MGIG: a not positive definite");
}

MgigParams RankOneMgigParams::general() const {
  return MgigParams{q, b * z * z.transpose(), a};
}

double sample_gamma(double shape, double rate, RngStream& rng) {
  require(positive_finite(shape) && positive_finite(rate), "gamma: shape and rate must be positive");
  if (shape >= 1.0) return gamma_mt(shape, rng) / rate;
  // Boost a sub-unit shape: G(a) = G(a+1) U^(1/a).
  const double g = gamma_mt(shape + 1.0, rng);
  return g * std::pow(rng.uniform(), 1.0 / shape) / rate;
}

Eigen::VectorXd sample_dirichlet(const Eigen::Ref<const Eigen::VectorXd>& concentration,
                                 RngStream& rng) {
  require(concentration.size() > 0, "dirichlet: empty concentration");
  Eigen::VectorXd g(concentration.size());
  for (Eigen::Index k = 0; k < concentration.size(); ++k) {
    require(positive_finite(concentration[k]), "dirichlet: concentrations must be positive");
    g[k] = sample_gamma(concentration[k], 1.0, rng);
  }
  return g / g.sum();
}

Eigen::VectorXd sample_mvn(const Eigen::Ref<const Eigen::VectorXd>& mean,
                           const Eigen::Ref<const Eigen::MatrixXd>& cov, RngStream& rng) {
  require(cov.rows() == mean.size(), "mvn: dimension mismatch");
  const auto llt = spd_factor(cov, "mvn: covariance not positive definite");
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return mean + llt.matrixL() * z;
}

double normal_quantile(double p) {
  require(p > 0.0 && p < 1.0, "normal_quantile: p must be in (0,1)");
  // Acklam's rational approximation followed by one Halley step.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00, 2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x = 0.0;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

double sample_truncated_normal_positive(double mean, double variance, RngStream& rng) {
  require(std::isfinite(mean), "truncated normal: mean must be finite");
  require(positive_finite(variance), "truncated normal: variance must be positive");
  const double sd = std::sqrt(variance);
  const double lower = -mean / sd;  // truncation point on the standard scale
  for (;;) {
    double z = 0.0;
    if (lower > 5.0) {
      // Robert (1995) exponential proposal for the far tail.
      const double rate = 0.5 * (lower + std::sqrt(lower * lower + 4.0));
      for (;;) {
        z = lower - std::log(rng.uniform()) / rate;
        const double diff = z - rate;
        if (rng.uniform() <= std::exp(-0.5 * diff * diff)) break;
      }
    } else {
      const double tail = standard_normal_upper_tail(lower);
      z = -normal_quantile(rng.uniform() * tail);
    }
    const double x = mean + sd * z;
    if (x > 0.0 && std::isfinite(x)) return x;
  }
}

Eigen::MatrixXd sample_wishart(const WishartParams& params, RngStream& rng) {
  params.validate();
  const auto n = params.rate.rows();
  const Eigen::MatrixXd r = Eigen::LLT<Eigen::MatrixXd>(params.rate).matrixL();
  // Bartlett factor for dof 2q.
  Eigen::MatrixXd bartlett = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    bartlett(i, i) = std::sqrt(sample_gamma(params.q - 0.5 * static_cast<double>(i), 0.5, rng));
    for (Eigen::Index j = 0; j < i; ++j) bartlett(i, j) = rng.normal();
  }
  // Scale (2c)^{-1} = M M^T with M = R^{-T} / sqrt(2).
  const Eigen::MatrixXd m = r.transpose().triangularView<Eigen::Upper>().solve(bartlett);
  Eigen::MatrixXd w = 0.5 * m * m.transpose();
  return 0.5 * (w + w.transpose());
}

double sample_inverse_gaussian(double gamma, double delta, RngStream& rng) {
  require(positive_finite(gamma) && positive_finite(delta),
          "inverse Gaussian: gamma and delta must be positive");
  const double mean = delta / gamma;
  const double shape = delta * delta;
  const double nu = rng.normal();
  const double y = nu * nu;
  const double my = mean * y;
  const double x =
      mean + mean * my / (2.0 * shape) -
      (mean / (2.0 * shape)) * std::sqrt(4.0 * mean * shape * y + my * my);
  if (rng.uniform() <= mean / (mean + x)) return x;
  return mean * mean / x;
}

int sample_categorical(const Eigen::Ref<const Eigen::VectorXd>& probabilities, RngStream& rng) {
  const auto k = probabilities.size();
  require(k > 0, "categorical: empty probability vector");
  const double target = rng.uniform() * probabilities.sum();
  double cumulative = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    cumulative += probabilities[i];
    if (target < cumulative) return static_cast<int>(i);
  }
  for (Eigen::Index i = k - 1; i >= 0; --i) {
    if (probabilities[i] > 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(k - 1);
}

double gig_logpdf(const GigParams& params, double x) {
  params.validate();
  require(std::isfinite(x) && x > 0.0, "GIG logpdf: x must be positive");
  const double omega = std::sqrt(params.chi * params.psi);
  return 0.5 * params.lambda * std::log(params.psi / params.chi) - std::numbers::ln2 -
         log_bessel_k(params.lambda, omega) + (params.lambda - 1.0) * std::log(x) -
         0.5 * (params.chi / x + params.psi * x);
}

double gig_markov_step(double current, const GigParams& params, RngStream& rng) {
  params.validate();
  require(params.lambda > 0.0, "GIG chain: order must be positive");
  require(positive_finite(current), "GIG chain: state must be positive");
  // Rate assignment fixed by the moment oracle in the tests: the additive
  // term carries psi/2, the term under the fraction carries chi/2. Swapping
  // them targets GIG(lambda, psi, chi) instead.
  const double v = sample_gamma(params.lambda, 0.5 * params.chi, rng);
  const double s = sample_gamma(params.lambda, 0.5 * params.psi, rng);
  return s + 1.0 / (v + 1.0 / current);
}

double sample_gig(const GigParams& params, RngStream& rng, std::optional<double> warm_start,
                  int n_steps) {
  params.validate();
  require(params.lambda != 0.0, "GIG sampler: order zero is not supported");
  require(n_steps >= 1, "GIG sampler: n_steps must be positive");
  const double start = warm_start.value_or(kGigColdStartValue);
  require(positive_finite(start), "GIG sampler: warm start must be positive");
  if (params.lambda > 0.0) {
    double u = start;
    for (int i = 0; i < n_steps; ++i) u = gig_markov_step(u, params, rng);
    return u;
  }
  // 1/X ~ GIG(-lambda, psi, chi).
  const GigParams flipped{-params.lambda, params.psi, params.chi};
  double u = 1.0 / start;
  for (int i = 0; i < n_steps; ++i) u = gig_markov_step(u, flipped, rng);
  return 1.0 / u;
}

Eigen::MatrixXd sample_inverse_wishart(double q, const Eigen::Ref<const Eigen::MatrixXd>& a,
                                       RngStream& rng) {
  const Eigen::MatrixXd w = sample_wishart(WishartParams{q, a}, rng);
  return spd_inverse(w);
}

Eigen::MatrixXd sample_mgig(const RankOneMgigParams& params, RngStream& rng, int gig_steps) {
  params.validate();
  const auto n = static_cast<double>(params.a.rows());
  const double p = params.q + 0.5 * (1.0 - n);
  const double zaz = params.z.dot(params.a * params.z);
  // X has density x^{-p-1} exp(-(z^T a z) x - b / x).
  const double x = sample_gig(GigParams{-p, 2.0 * params.b, 2.0 * zaz}, rng, std::nullopt, gig_steps);
  const Eigen::MatrixXd w = sample_wishart(WishartParams{params.q, params.a}, rng);
  const Eigen::MatrixXd m = x * params.z * params.z.transpose() + w;
  return spd_inverse(m);
}

double mgig_log_density_unnormalized(const MgigParams& params,
                                     const Eigen::Ref<const Eigen::MatrixXd>& x) {
  const auto llt = spd_factor(x, "MGIG density: argument not positive definite");
  const auto n = static_cast<double>(x.rows());
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(x.rows(), x.cols()));
  return -(params.p + 0.5 * (n + 1.0)) * log_det - (params.linear * x).trace() -
         (params.inverse * inv).trace();
}

}  // namespace mnig
