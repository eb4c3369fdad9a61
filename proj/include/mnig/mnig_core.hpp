#pragma once

#include <optional>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "mnig/rng.hpp"

namespace mnig {

inline constexpr double kUnitDeterminantTolerance = 1e-8;

/// One MNIG component (mu, beta, delta, gamma, Delta) with |Delta| = 1.
///
/// Y | U = u ~ N(mu + u Delta beta, u Delta), U ~ IG(gamma, delta).
/// The Cholesky factor of Delta is computed once at construction.
class MnigComponent {
 public:
  /// Throws std::domain_error if Delta is not SPD, |det(Delta) - 1| >= 1e-8,
  /// delta or gamma is not positive, or dimensions disagree.
  MnigComponent(Eigen::VectorXd mu, Eigen::VectorXd beta, double delta, double gamma,
                Eigen::MatrixXd Delta);

  Eigen::Index dim() const { return mu_.size(); }
  const Eigen::VectorXd& mu() const { return mu_; }
  const Eigen::VectorXd& beta() const { return beta_; }
  double delta() const { return delta_; }
  double gamma() const { return gamma_; }
  const Eigen::MatrixXd& Delta() const { return Delta_; }
  const Eigen::LLT<Eigen::MatrixXd>& Delta_factor() const { return factor_; }

  /// alpha = sqrt(gamma^2 + beta^T Delta beta).
  double alpha() const { return alpha_; }

  /// (y - mu)^T Delta^{-1} (y - mu).
  double mahalanobis_sq(const Eigen::Ref<const Eigen::VectorXd>& y) const;

  /// q(y)^2 = delta^2 + (y - mu)^T Delta^{-1} (y - mu).
  double q_sq(const Eigen::Ref<const Eigen::VectorXd>& y) const {
    return delta_ * delta_ + mahalanobis_sq(y);
  }

  /// E[Y] = mu + (delta / gamma) Delta beta.
  Eigen::VectorXd mean() const;

 private:
  Eigen::VectorXd mu_;
  Eigen::VectorXd beta_;
  double delta_;
  double gamma_;
  Eigen::MatrixXd Delta_;
  Eigen::LLT<Eigen::MatrixXd> factor_;
  Eigen::VectorXd Delta_beta_;
  double alpha_;
};

struct MixtureModel {
  Eigen::VectorXd weights;
  std::vector<MnigComponent> components;

  /// Throws std::domain_error unless the weights are positive, sum to one
  /// within 1e-12, and every component has the same dimension.
  void validate() const;
  Eigen::Index size() const { return weights.size(); }
  Eigen::Index dim() const { return components.empty() ? 0 : components.front().dim(); }
};

/// Per-component accumulators for hard assignments z:
/// t0 = sum z, t1 = sum z y, t2 = sum z y / u, t3 = sum z u / 2,
/// t4 = sum z / (2u), t5 = sum z y y^T / (2u).
struct SufficientStats {
  double t0 = 0.0;
  Eigen::VectorXd t1;
  Eigen::VectorXd t2;
  double t3 = 0.0;
  double t4 = 0.0;
  Eigen::MatrixXd t5;

  static SufficientStats zero(Eigen::Index d);
  SufficientStats& operator+=(const SufficientStats& other);
};

/// Observations are rows of y. Labels, when present, are 1-based class ids.
struct Dataset {
  Eigen::MatrixXd y;
  std::optional<Eigen::VectorXi> labels;

  Eigen::Index n() const { return y.rows(); }
  Eigen::Index dim() const { return y.cols(); }
  void validate() const;
};

double mnig_logpdf(const MnigComponent& comp, const Eigen::Ref<const Eigen::VectorXd>& y);

/// log f(y | u) + log f(u): normal given the latent scale times the IG density.
double mnig_joint_logpdf(const MnigComponent& comp, const Eigen::Ref<const Eigen::VectorXd>& y,
                         double u);

/// log IG(u; gamma, delta).
double inverse_gaussian_logpdf(double gamma, double delta, double u);

/// n x G matrix of log(pi_g) + log f_g(y_i).
Eigen::MatrixXd weighted_log_densities(const MixtureModel& model,
                                       const Eigen::Ref<const Eigen::MatrixXd>& y);

double mixture_loglik(const MixtureModel& model, const Dataset& data);

/// Row-wise posterior class probabilities pi_g f_g(y_i) / sum_k pi_k f_k(y_i).
Eigen::MatrixXd membership_probabilities(const MixtureModel& model,
                                         const Eigen::Ref<const Eigen::MatrixXd>& y);

/// Numerically stable log(sum(exp(v))).
double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v);

/// u and z are n x G; z rows must be one-hot and u positive.
std::vector<SufficientStats> accumulate_stats(const Dataset& data,
                                              const Eigen::Ref<const Eigen::MatrixXd>& u,
                                              const Eigen::Ref<const Eigen::MatrixXd>& z);

/// n draws from the mixture; labels record the generating component (1-based).
Dataset generate_dataset(const MixtureModel& model, Eigen::Index n, RngStream& rng);

/// The law of shift + diag(scale) Y for Y ~ comp, re-expressed with a unit
/// determinant scale matrix.
MnigComponent affine_transform(const MnigComponent& comp,
                               const Eigen::Ref<const Eigen::VectorXd>& shift,
                               const Eigen::Ref<const Eigen::VectorXd>& scale);

MixtureModel affine_transform(const MixtureModel& model,
                              const Eigen::Ref<const Eigen::VectorXd>& shift,
                              const Eigen::Ref<const Eigen::VectorXd>& scale);

/// Rescales an SPD matrix by det^{-1/d} so that its determinant is one.
Eigen::MatrixXd normalize_determinant(const Eigen::Ref<const Eigen::MatrixXd>& m);

}  // namespace mnig
