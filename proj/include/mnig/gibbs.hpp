#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mnig/diagnostics.hpp"
#include "mnig/errors.hpp"
#include "mnig/mnig_core.hpp"
#include "mnig/rng.hpp"

namespace mnig {

/// Conjugate prior, shared by all components.
struct PriorSpec {
  double a0 = 1.0;
  Eigen::VectorXd a1;
  Eigen::VectorXd a2;
  double a3 = 1.0;
  double a4 = 1.0;
  Eigen::VectorXd dirichlet;  // one concentration per component
  double nu0 = 0.0;
  Eigen::MatrixXd Lambda0;

  /// Throws std::invalid_argument on shape errors or when the positivity
  /// conditions 4 a3 a4 - a0^2 > 0, a4 - a0^2/(4 a3) > 0 fail.
  void validate(Eigen::Index d, Eigen::Index G) const;
};

/// User-facing prior settings; scalar a1/a2 are broadcast to all coordinates.
/// Unset nu0 and Lambda0 default to d + 2 and the identity.
struct PriorOptions {
  double a0 = 1.0;
  std::optional<double> a1;
  std::optional<double> a2;
  double a3 = 1.0;
  double a4 = 1.0;
  double dirichlet = 1.0;
  std::optional<double> nu0;
  std::optional<double> lambda0_scale;

  /// Unset a1 and a2 are zero: the prior means of mu and beta are 0.
  PriorSpec build(Eigen::Index d, Eigen::Index G) const;
  /// With a1 and a2 both unset, they are chosen so the prior mean of mu is
  /// the sample mean and that of beta is 0 (a1 = a0 ybar, a2 = 2 a4 ybar).
  /// This keeps the sampler equivariant under translation of the data.
  PriorSpec build(const Dataset& data, Eigen::Index G) const;
};

/// Posterior hyperparameters a_j = a_j^(0) + t_j of one component.
struct Hyperparams {
  double a0 = 0.0;
  Eigen::VectorXd a1;
  Eigen::VectorXd a2;
  double a3 = 0.0;
  double a4 = 0.0;
};

enum class RelabelMethod {
  kPivot,        // align every draw to the highest-likelihood draw
  kWeightOrder,  // sort each draw by ascending weight independently
};

struct GibbsConfig {
  long n_iterations = 2000;
  int n_chains = 3;
  double burnin_fraction = 0.5;
  int inner_gig_steps = 10;
  int mgig_gig_steps = 200;
  std::uint64_t seed = 1;
  bool parallel = true;
  RelabelMethod relabel = RelabelMethod::kPivot;
  /// Upper bound on the pooled draws used to average membership
  /// probabilities; they are thinned evenly.
  int membership_draws = 200;

  void validate() const;
};

struct ChainState {
  MixtureModel model;
  Eigen::MatrixXd z;  // n x G one-hot
  Eigen::MatrixXd u;  // n x G
  double observed_loglik = 0.0;
  long iteration = 0;
};

// Single steps of a sweep.

ChainState initialize(const Dataset& data, int G, const PriorSpec& prior, RngStream& rng);

void update_memberships(ChainState& state, const Dataset& data, RngStream& rng);

/// GIG order of the latent scale given y: -(d + 1) / 2.
double latent_gig_order(Eigen::Index d);

void update_latents(ChainState& state, const Dataset& data, RngStream& rng, int inner_steps);

/// `component` only labels the error message.
Hyperparams update_hyperparams(const PriorSpec& prior, const SufficientStats& stats,
                               int component = -1);

double draw_delta_sq(const Hyperparams& h, RngStream& rng);

double draw_gamma_given_delta(const Hyperparams& h, double delta, RngStream& rng);

/// Mean (mu, beta) stacked as a 2d-vector and the 2d x 2d covariance of the
/// conditional posterior given Delta.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> mu_beta_moments(
    const Hyperparams& h, const Eigen::Ref<const Eigen::MatrixXd>& Delta);

std::pair<Eigen::VectorXd, Eigen::VectorXd> draw_mu_beta(
    const Hyperparams& h, const Eigen::Ref<const Eigen::MatrixXd>& Delta, RngStream& rng);

/// S0 = sum_i z_i (y_i - mu)(y_i - mu)^T / u_i.
Eigen::MatrixXd scatter_matrix(const Dataset& data, const Eigen::Ref<const Eigen::VectorXd>& z,
                               const Eigen::Ref<const Eigen::VectorXd>& u,
                               const Eigen::Ref<const Eigen::VectorXd>& mu);

/// Draws the scale matrix from its conditional posterior, then rescales it to
/// unit determinant. beta == 0 or t3 == 0 uses the inverse-Wishart limit.
Eigen::MatrixXd draw_delta_matrix(const Eigen::Ref<const Eigen::VectorXd>& beta, double t3,
                                  double t0, const Dataset& data,
                                  const Eigen::Ref<const Eigen::VectorXd>& z,
                                  const Eigen::Ref<const Eigen::VectorXd>& mu,
                                  const Eigen::Ref<const Eigen::VectorXd>& u,
                                  const PriorSpec& prior, RngStream& rng,
                                  int gig_steps = 200);

Eigen::VectorXd draw_weights(const Eigen::Ref<const Eigen::VectorXd>& dirichlet_prior,
                             const Eigen::Ref<const Eigen::VectorXd>& t0, RngStream& rng);

/// One full sweep: memberships, latents, then per component delta^2, gamma,
/// Delta, (mu, beta), and finally the weights.
void gibbs_sweep(ChainState& state, const Dataset& data, const PriorSpec& prior,
                 const GibbsConfig& config, RngStream& rng);

struct ChainFailure {
  long iteration = 0;
  int component = -1;  // 0-based, -1 when not attributable
  std::string message;
};

struct ChainTrace {
  int chain_id = 0;
  std::vector<MixtureModel> draws;  // draws[0] is the initialization
  std::vector<double> loglik;       // observed-data log-likelihood per draw
  std::optional<ChainFailure> failure;
};

ChainTrace run_chain(const Dataset& data, int G, const PriorSpec& prior,
                     const GibbsConfig& config, int chain_id, RngStream& rng);

struct FitResult {
  int G = 0;
  std::vector<ChainTrace> chains;
  std::vector<int> used_chains;  // chain ids that finished without failure
  std::vector<MixtureModel> pooled;  // post burn-in, relabelled
  std::vector<double> pooled_loglik;
  PosteriorSummary summary;
  MixtureModel posterior_mean;
  std::optional<PsrfResult> psrf;  // empty when fewer than two chains
  bool converged = false;
  double max_loglik = 0.0;
  Eigen::MatrixXd membership;      // n x G averaged probabilities
  Eigen::VectorXi classification;  // 1-based
};

/// Stream id used for chain `chain_id` of a G-component fit.
std::uint64_t chain_stream_id(int G, int chain_id);

/// Throws FitError when every chain fails.
FitResult fit(const Dataset& data, int G, const PriorSpec& prior, const GibbsConfig& config);

}  // namespace mnig
