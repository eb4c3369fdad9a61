#pragma once

#include <optional>

#include <Eigen/Core>

#include "mnig/rng.hpp"

namespace mnig {

/// GIG(lambda, chi, psi): density proportional to
/// x^(lambda-1) exp(-(chi/x + psi*x)/2) on x > 0. Interior case only.
struct GigParams {
  double lambda;
  double chi;
  double psi;

  void validate() const;
};

/// W_n(q, c) in rate form: density proportional to
/// |x|^(q-(n+1)/2) exp(-tr(c x)); requires q > (n-1)/2 and c SPD.
/// Mean is q * c^{-1}. Equivalent to the (dof, scale) form with dof = 2q and
/// scale = (2c)^{-1}.
struct WishartParams {
  double q;
  Eigen::MatrixXd rate;

  void validate() const;
};

/// MGIG_n(-p, linear, inverse): density proportional to
/// |x|^(-p-(n+1)/2) exp(-tr(linear * x) - tr(inverse * x^{-1})) on SPD
/// matrices.
struct MgigParams {
  double p;
  Eigen::MatrixXd linear;
  Eigen::MatrixXd inverse;
};

/// The rank-one family MGIG_n(-q, b z z^T, a) that the scale-matrix posterior
/// lives in.
struct RankOneMgigParams {
  double q;
  Eigen::MatrixXd a;  // coefficient of x^{-1}, SPD
  Eigen::VectorXd z;  // nonzero
  double b;           // > 0

  void validate() const;
  MgigParams general() const;
};

inline constexpr int kGigColdStartSteps = 200;
inline constexpr double kGigColdStartValue = 1.0;

/// Gamma with density proportional to v^(shape-1) exp(-rate v).
double sample_gamma(double shape, double rate, RngStream& rng);

Eigen::VectorXd sample_dirichlet(const Eigen::Ref<const Eigen::VectorXd>& concentration,
                                 RngStream& rng);

/// Throws std::domain_error when cov is not positive definite.
Eigen::VectorXd sample_mvn(const Eigen::Ref<const Eigen::VectorXd>& mean,
                           const Eigen::Ref<const Eigen::MatrixXd>& cov, RngStream& rng);

/// N(mean, variance) conditioned on being positive.
double sample_truncated_normal_positive(double mean, double variance, RngStream& rng);

Eigen::MatrixXd sample_wishart(const WishartParams& params, RngStream& rng);

/// IG(gamma, delta) with density
/// delta/sqrt(2 pi) e^{delta gamma} u^{-3/2} exp(-(delta^2/u + gamma^2 u)/2);
/// drawn with the Michael-Schucany-Haas transformation.
double sample_inverse_gaussian(double gamma, double delta, RngStream& rng);

/// Index drawn with the given (normalized) probabilities.
int sample_categorical(const Eigen::Ref<const Eigen::VectorXd>& probabilities, RngStream& rng);

double gig_logpdf(const GigParams& params, double x);

/// Standard normal quantile.
double normal_quantile(double p);

/// One step U' = S + 1 / (V + 1/U) of the continued-fraction chain with
/// S ~ Gamma(lambda, psi/2) and V ~ Gamma(lambda, chi/2). Its stationary law
/// is GIG(lambda, chi, psi). Requires lambda > 0.
double gig_markov_step(double current, const GigParams& params, RngStream& rng);

/// Runs n_steps of the continued-fraction chain from warm_start (or the cold
/// start value). Negative orders run the chain for GIG(-lambda, psi, chi) and
/// return the reciprocal state, so warm_start is always on the scale of the
/// requested distribution. lambda == 0 is rejected.
double sample_gig(const GigParams& params, RngStream& rng,
                  std::optional<double> warm_start = std::nullopt,
                  int n_steps = kGigColdStartSteps);

/// Draw from MGIG_n(-q, b z z^T, a) via the Matsumoto-Yor construction:
/// X ~ GIG(-(q + (1-n)/2), chi = 2b, psi = 2 z^T a z), W ~ W_n(q, a),
/// return (X z z^T + W)^{-1}.
Eigen::MatrixXd sample_mgig(const RankOneMgigParams& params, RngStream& rng,
                            int gig_steps = kGigColdStartSteps);

/// Draw X = W^{-1}, W ~ W_n(q, a): the b -> 0 limit of sample_mgig, with
/// density proportional to |x|^(-q-(n+1)/2) exp(-tr(a x^{-1})).
Eigen::MatrixXd sample_inverse_wishart(double q, const Eigen::Ref<const Eigen::MatrixXd>& a,
                                       RngStream& rng);

/// Unnormalized MGIG log density.
double mgig_log_density_unnormalized(const MgigParams& params,
                                     const Eigen::Ref<const Eigen::MatrixXd>& x);

}  // namespace mnig
