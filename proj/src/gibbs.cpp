#include "mnig/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <Eigen/Cholesky>

#include "mnig/distributions.hpp"
#include "mnig/kmeans.hpp"

namespace mnig {
namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr int kInitRetries = 5;

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

struct ComponentGeometry {
  Eigen::VectorXd mahal;  // (y - mu)^T Delta^{-1} (y - mu)
  Eigen::VectorXd proj;   // beta^T (y - mu)
};

ComponentGeometry geometry(const MnigComponent& comp, const Eigen::MatrixXd& y) {
  const Eigen::MatrixXd r = (y.rowwise() - comp.mu().transpose()).transpose();
  const Eigen::MatrixXd w = comp.Delta_factor().matrixL().solve(r);
  return {w.colwise().squaredNorm().transpose(), r.transpose() * comp.beta()};
}

Eigen::MatrixXd regularized_covariance(const Eigen::MatrixXd& points) {
  const auto d = points.cols();
  const auto m = points.rows();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(d, d);
  if (m > 1) {
    const Eigen::MatrixXd centered = points.rowwise() - points.colwise().mean();
    cov = centered.transpose() * centered / static_cast<double>(m - 1);
  }
  double ridge = 1e-6 * (cov.trace() / static_cast<double>(d) + 1.0);
  for (int attempt = 0; attempt < 60; ++attempt) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().minCoeff() > 1e-150) break;
    cov.diagonal().array() += ridge;
    ridge *= 10.0;
  }
  return cov;
}

}  // namespace

void PriorSpec::validate(Eigen::Index d, Eigen::Index G) const {
  require(a1.size() == d && a2.size() == d, "prior: a1 and a2 must have length d");
  require(Lambda0.rows() == d && Lambda0.cols() == d, "prior: Lambda0 must be d x d");
  require(dirichlet.size() == G, "prior: one Dirichlet concentration per component");
  require((dirichlet.array() > 0.0).all(), "prior: Dirichlet concentrations must be positive");
  require(a0 >= 0.0 && a3 > 0.0 && a4 > 0.0, "prior: need a0 >= 0, a3 > 0, a4 > 0");
  require(4.0 * a3 * a4 - a0 * a0 > 0.0, "prior: need 4 a3 a4 - a0^2 > 0");
  require(a4 - a0 * a0 / (4.0 * a3) > 0.0, "prior: need a4 - a0^2 / (4 a3) > 0");
  require(nu0 >= static_cast<double>(d), "prior: nu0 must be at least d");
  require(Lambda0.isApprox(Lambda0.transpose()), "prior: Lambda0 must be symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(Lambda0);
  require(llt.info() == Eigen::Success, "prior: Lambda0 must be positive definite");
}

PriorSpec PriorOptions::build(Eigen::Index d, Eigen::Index G) const {
  PriorSpec p;
  p.a0 = a0;
  p.a1 = Eigen::VectorXd::Constant(d, a1.value_or(0.0));
  p.a2 = Eigen::VectorXd::Constant(d, a2.value_or(0.0));
  p.a3 = a3;
  p.a4 = a4;
  p.dirichlet = Eigen::VectorXd::Constant(G, dirichlet);
  p.nu0 = nu0.value_or(static_cast<double>(d) + 2.0);
  p.Lambda0 = lambda0_scale.value_or(1.0) * Eigen::MatrixXd::Identity(d, d);
  p.validate(d, G);
  return p;
}

PriorSpec PriorOptions::build(const Dataset& data, Eigen::Index G) const {
  PriorSpec p = build(data.dim(), G);
  if (!a1 && !a2 && data.n() > 0) {
    const Eigen::VectorXd ybar = data.y.colwise().mean().transpose();
    p.a1 = a0 * ybar;
    p.a2 = 2.0 * a4 * ybar;
  }
  return p;
}

void GibbsConfig::validate() const {
  require(n_iterations >= 0, "config: n_iterations must be non-negative");
  require(n_chains >= 1, "config: n_chains must be positive");
  require(burnin_fraction > 0.0 && burnin_fraction < 1.0, "config: burn-in must lie in (0, 1)");
  require(inner_gig_steps >= 1 && mgig_gig_steps >= 1, "config: inner steps must be positive");
  require(membership_draws >= 1, "config: membership_draws must be positive");
}

ChainState initialize(const Dataset& data, int G, const PriorSpec& prior, RngStream& rng) {
  data.validate();
  require(G >= 1 && G <= data.n(), "initialize: need 1 <= G <= n");
  prior.validate(data.dim(), G);
  const auto n = data.n();
  const auto d = data.dim();

  std::optional<KMeansResult> km;
  for (int attempt = 0; attempt < kInitRetries && !km; ++attempt) {
    try {
      km = kmeans(data.y, G, rng);
    } catch (const std::runtime_error&) {
    }
  }
  if (!km) throw std::runtime_error("initialize: k-means left a cluster empty on every retry");

  ChainState s;
  s.z = Eigen::MatrixXd::Zero(n, G);
  s.u = Eigen::MatrixXd::Ones(n, G);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(G);
  for (Eigen::Index i = 0; i < n; ++i) {
    s.z(i, km->assignment[i]) = 1.0;
    counts[km->assignment[i]] += 1.0;
  }
  s.model.weights = counts / static_cast<double>(n);
  for (int g = 0; g < G; ++g) {
    Eigen::MatrixXd pts(static_cast<Eigen::Index>(counts[g]), d);
    Eigen::Index row = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (km->assignment[i] == g) pts.row(row++) = data.y.row(i);
    }
    s.model.components.emplace_back(pts.colwise().mean().transpose(),
                                    Eigen::VectorXd::Constant(d, 0.05), 1.0, 1.0,
                                    normalize_determinant(regularized_covariance(pts)));
  }
  s.observed_loglik = mixture_loglik(s.model, data);
  s.iteration = 0;
  return s;
}

void update_memberships(ChainState& state, const Dataset& data, RngStream& rng) {
  const auto n = data.n();
  const auto G = state.model.size();
  const double d = static_cast<double>(data.dim());
  Eigen::MatrixXd logp(n, G);
  for (Eigen::Index g = 0; g < G; ++g) {
    const auto& comp = state.model.components[static_cast<std::size_t>(g)];
    const auto geo = geometry(comp, data.y);
    const double log_det = 2.0 * comp.Delta_factor().matrixLLT().diagonal().array().log().sum();
    const double bdb = comp.alpha() * comp.alpha() - comp.gamma() * comp.gamma();
    const double dl = comp.delta();
    const double gm = comp.gamma();
    const double base = std::log(state.model.weights[g]) - 0.5 * log_det - 0.5 * d * kLog2Pi +
                        std::log(dl) - 0.5 * kLog2Pi + dl * gm;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double u = state.u(i, g);
      const double quad = geo.mahal[i] / u - 2.0 * geo.proj[i] + u * bdb;
      logp(i, g) = base - 0.5 * d * std::log(u) - 0.5 * quad - 1.5 * std::log(u) -
                   0.5 * (dl * dl / u + gm * gm * u);
    }
  }
  Eigen::VectorXd prob(G);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd row = logp.row(i).transpose();
    if (!row.allFinite() && !(row.array() == -std::numeric_limits<double>::infinity()).any()) {
      throw std::domain_error("update_memberships: non-finite joint density");
    }
    const double lse = log_sum_exp(row);
    if (!std::isfinite(lse)) throw std::domain_error("update_memberships: all densities vanish");
    prob = (row.array() - lse).exp();
    prob /= prob.sum();
    const int k = G == 1 ? 0 : sample_categorical(prob, rng);
    state.z.row(i).setZero();
    state.z(i, k) = 1.0;
  }
}

void update_latents(ChainState& state, const Dataset& data, RngStream& rng, int inner_steps) {
  const auto n = data.n();
  const auto G = state.model.size();
  // Conditional density is proportional to u^{-(d+3)/2} exp(-(q^2/u + alpha^2 u)/2).
  const double order = latent_gig_order(data.dim());
  for (Eigen::Index g = 0; g < G; ++g) {
    const auto& comp = state.model.components[static_cast<std::size_t>(g)];
    const auto geo = geometry(comp, data.y);
    const double psi = comp.alpha() * comp.alpha();
    const double dsq = comp.delta() * comp.delta();
    for (Eigen::Index i = 0; i < n; ++i) {
      const GigParams p{order, dsq + geo.mahal[i], psi};
      state.u(i, g) = sample_gig(p, rng, state.u(i, g), inner_steps);
    }
  }
}

Hyperparams update_hyperparams(const PriorSpec& prior, const SufficientStats& stats,
                               int component) {
  Hyperparams h;
  h.a0 = prior.a0 + stats.t0;
  h.a1 = prior.a1 + stats.t1;
  h.a2 = prior.a2 + stats.t2;
  h.a3 = prior.a3 + stats.t3;
  h.a4 = prior.a4 + stats.t4;
  if (!(h.a3 > 0.0) || !(4.0 * h.a3 * h.a4 - h.a0 * h.a0 > 0.0)) {
    throw DegeneracyError(component, "posterior needs 4 a3 a4 - a0^2 > 0");
  }
  return h;
}

double draw_delta_sq(const Hyperparams& h, RngStream& rng) {
  if (!(h.a3 > 0.0)) throw DegeneracyError(-1, "delta^2 posterior needs a3 > 0");
  const double rate = h.a4 - h.a0 * h.a0 / (4.0 * h.a3);
  if (!(rate > 0.0)) throw DegeneracyError(-1, "delta^2 posterior has non-positive rate");
  return sample_gamma(0.5 * h.a0 + 1.0, rate, rng);
}

double draw_gamma_given_delta(const Hyperparams& h, double delta, RngStream& rng) {
  if (!(h.a3 > 0.0)) throw DegeneracyError(-1, "gamma posterior needs a3 > 0");
  return sample_truncated_normal_positive(h.a0 * delta / (2.0 * h.a3), 1.0 / (2.0 * h.a3), rng);
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> mu_beta_moments(
    const Hyperparams& h, const Eigen::Ref<const Eigen::MatrixXd>& Delta) {
  const auto d = Delta.rows();
  const double den = 4.0 * h.a3 * h.a4 - h.a0 * h.a0;
  if (!(den > 0.0)) throw DegeneracyError(-1, "(mu, beta) posterior needs 4 a3 a4 - a0^2 > 0");
  Eigen::LLT<Eigen::MatrixXd> llt(Delta);
  if (llt.info() != Eigen::Success) throw DegeneracyError(-1, "Delta is not positive definite");
  const Eigen::MatrixXd Delta_inv = llt.solve(Eigen::MatrixXd::Identity(d, d));
  Eigen::VectorXd mean(2 * d);
  mean.head(d) = (2.0 * h.a3 * h.a2 - h.a0 * h.a1) / den;
  mean.tail(d) = Delta_inv * (2.0 * h.a4 * h.a1 - h.a0 * h.a2) / den;
  Eigen::MatrixXd cov(2 * d, 2 * d);
  cov.topLeftCorner(d, d) = 2.0 * h.a3 * Delta / den;
  cov.bottomRightCorner(d, d) = 2.0 * h.a4 * Delta_inv / den;
  cov.topRightCorner(d, d) = -h.a0 / den * Eigen::MatrixXd::Identity(d, d);
  cov.bottomLeftCorner(d, d) = cov.topRightCorner(d, d);
  return {mean, cov};
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> draw_mu_beta(
    const Hyperparams& h, const Eigen::Ref<const Eigen::MatrixXd>& Delta, RngStream& rng) {
  const auto d = Delta.rows();
  const auto [mean, cov] = mu_beta_moments(h, Delta);
  Eigen::VectorXd x;
  try {
    x = sample_mvn(mean, cov, rng);
  } catch (const std::domain_error&) {
    throw DegeneracyError(-1, "(mu, beta) posterior covariance is not positive definite");
  }
  return {x.head(d), x.tail(d)};
}

Eigen::MatrixXd scatter_matrix(const Dataset& data, const Eigen::Ref<const Eigen::VectorXd>& z,
                               const Eigen::Ref<const Eigen::VectorXd>& u,
                               const Eigen::Ref<const Eigen::VectorXd>& mu) {
  const auto d = data.dim();
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (z[i] == 0.0) continue;
    const Eigen::VectorXd r = data.y.row(i).transpose() - mu;
    s.selfadjointView<Eigen::Lower>().rankUpdate(r, z[i] / u[i]);
  }
  return s.selfadjointView<Eigen::Lower>();
}

Eigen::MatrixXd draw_delta_matrix(const Eigen::Ref<const Eigen::VectorXd>& beta, double t3,
                                  double t0, const Dataset& data,
                                  const Eigen::Ref<const Eigen::VectorXd>& z,
                                  const Eigen::Ref<const Eigen::VectorXd>& mu,
                                  const Eigen::Ref<const Eigen::VectorXd>& u,
                                  const PriorSpec& prior, RngStream& rng, int gig_steps) {
  const auto d = data.dim();
  if (d == 1) return Eigen::MatrixXd::Ones(1, 1);
  // In the exp(-tr(a x^{-1}) - tr(b x)) parametrization the likelihood and
  // prior contribute halves: a = (S0 + Lambda0) / 2 and b = t3 beta beta^T.
  const double q = 0.5 * (prior.nu0 + t0);
  const Eigen::MatrixXd a = 0.5 * (scatter_matrix(data, z, u, mu) + prior.Lambda0);
  Eigen::MatrixXd x;
  try {
    if (t3 > 0.0 && beta.squaredNorm() > 0.0) {
      x = sample_mgig(RankOneMgigParams{q, a, beta, t3}, rng, gig_steps);
    } else {
      x = sample_inverse_wishart(q, a, rng);
    }
  } catch (const std::domain_error& e) {
    throw DegeneracyError(-1, std::string("Delta posterior: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DegeneracyError(-1, std::string("Delta posterior: ") + e.what());
  }
  x = 0.5 * (x + x.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(x);
  if (llt.info() != Eigen::Success || !x.allFinite()) {
    throw DegeneracyError(-1, "Delta draw is not positive definite");
  }
  return normalize_determinant(x);
}

Eigen::VectorXd draw_weights(const Eigen::Ref<const Eigen::VectorXd>& dirichlet_prior,
                             const Eigen::Ref<const Eigen::VectorXd>& t0, RngStream& rng) {
  require(dirichlet_prior.size() == t0.size(), "draw_weights: size mismatch");
  return sample_dirichlet(dirichlet_prior + t0, rng);
}

void gibbs_sweep(ChainState& state, const Dataset& data, const PriorSpec& prior,
                 const GibbsConfig& config, RngStream& rng) {
  const auto G = state.model.size();
  update_memberships(state, data, rng);
  update_latents(state, data, rng, config.inner_gig_steps);
  const auto stats = accumulate_stats(data, state.u, state.z);

  std::vector<MnigComponent> next;
  next.reserve(static_cast<std::size_t>(G));
  Eigen::VectorXd t0(G);
  for (Eigen::Index g = 0; g < G; ++g) {
    const int gi = static_cast<int>(g);
    const auto& st = stats[static_cast<std::size_t>(g)];
    const auto& old = state.model.components[static_cast<std::size_t>(g)];
    t0[g] = st.t0;
    try {
      const Hyperparams h = update_hyperparams(prior, st, gi);
      const double delta = std::sqrt(draw_delta_sq(h, rng));
      const double gamma = draw_gamma_given_delta(h, delta, rng);
      Eigen::MatrixXd Delta = draw_delta_matrix(old.beta(), st.t3, st.t0, data, state.z.col(g),
                                                old.mu(), state.u.col(g), prior, rng,
                                                config.mgig_gig_steps);
      auto [mu, beta] = draw_mu_beta(h, Delta, rng);
      if (!(delta > 0.0) || !(gamma > 0.0) || !std::isfinite(delta) || !std::isfinite(gamma)) {
        throw DegeneracyError(gi, "non-positive delta or gamma draw");
      }
      next.emplace_back(std::move(mu), std::move(beta), delta, gamma, std::move(Delta));
    } catch (const DegeneracyError& e) {
      if (e.component() >= 0) throw;
      throw DegeneracyError(gi, e.what());
    } catch (const std::domain_error& e) {
      throw DegeneracyError(gi, e.what());
    }
  }
  Eigen::VectorXd w = draw_weights(prior.dirichlet, t0, rng);
  // Guard against a weight that underflows to zero.
  w = w.cwiseMax(std::numeric_limits<double>::min());
  state.model.weights = w / w.sum();
  state.model.components = std::move(next);
  state.observed_loglik = mixture_loglik(state.model, data);
  if (!std::isfinite(state.observed_loglik)) {
    throw DegeneracyError(-1, "observed log-likelihood is not finite");
  }
  ++state.iteration;
}

ChainTrace run_chain(const Dataset& data, int G, const PriorSpec& prior,
                     const GibbsConfig& config, int chain_id, RngStream& rng) {
  config.validate();
  ChainTrace trace;
  trace.chain_id = chain_id;
  ChainState state = initialize(data, G, prior, rng);
  trace.draws.reserve(static_cast<std::size_t>(config.n_iterations) + 1);
  trace.loglik.reserve(static_cast<std::size_t>(config.n_iterations) + 1);
  trace.draws.push_back(state.model);
  trace.loglik.push_back(state.observed_loglik);
  for (long it = 1; it <= config.n_iterations; ++it) {
    try {
      gibbs_sweep(state, data, prior, config, rng);
    } catch (const DegeneracyError& e) {
      trace.failure = ChainFailure{it, e.component(), e.what()};
      break;
    } catch (const std::domain_error& e) {
      trace.failure = ChainFailure{it, -1, e.what()};
      break;
    }
    trace.draws.push_back(state.model);
    trace.loglik.push_back(state.observed_loglik);
  }
  return trace;
}

double latent_gig_order(Eigen::Index d) { return -0.5 * (static_cast<double>(d) + 1.0); }

std::uint64_t chain_stream_id(int G, int chain_id) {
  return (static_cast<std::uint64_t>(G) << 32) | static_cast<std::uint32_t>(chain_id);
}

FitResult fit(const Dataset& data, int G, const PriorSpec& prior, const GibbsConfig& config) {
  config.validate();
  data.validate();
  prior.validate(data.dim(), G);
  require(G >= 1 && G <= data.n(), "fit: need 1 <= G <= n");
  // Validates the burn-in against the chain length before any work is done.
  burnin_count(static_cast<std::size_t>(config.n_iterations) + 1, config.burnin_fraction);

  FitResult r;
  r.G = G;
  auto work = [&](int c) {
    RngStream rng(config.seed, chain_stream_id(G, c));
    return run_chain(data, G, prior, config, c, rng);
  };
  if (config.parallel && config.n_chains > 1) {
    std::vector<std::future<ChainTrace>> jobs;
    for (int c = 0; c < config.n_chains; ++c) {
      jobs.push_back(std::async(std::launch::async, work, c));
    }
    for (auto& j : jobs) r.chains.push_back(j.get());
  } else {
    for (int c = 0; c < config.n_chains; ++c) r.chains.push_back(work(c));
  }

  std::vector<std::vector<double>> kept_loglik;
  for (const auto& ch : r.chains) {
    if (ch.failure) continue;
    r.used_chains.push_back(ch.chain_id);
    auto draws = apply_burnin(ch.draws, config.burnin_fraction);
    auto ll = apply_burnin(ch.loglik, config.burnin_fraction);
    r.pooled.insert(r.pooled.end(), std::make_move_iterator(draws.begin()),
                    std::make_move_iterator(draws.end()));
    r.pooled_loglik.insert(r.pooled_loglik.end(), ll.begin(), ll.end());
    kept_loglik.push_back(std::move(ll));
  }
  if (r.used_chains.empty()) {
    std::ostringstream msg;
    msg << "all chains failed for G = " << G;
    for (const auto& ch : r.chains) {
      msg << "; chain " << ch.chain_id + 1 << " at iteration " << ch.failure->iteration << ": "
          << ch.failure->message;
    }
    throw FitError(msg.str());
  }

  if (kept_loglik.size() >= 2) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(kept_loglik.size()),
                      static_cast<Eigen::Index>(kept_loglik.front().size()));
    for (std::size_t c = 0; c < kept_loglik.size(); ++c) {
      m.row(static_cast<Eigen::Index>(c)) =
          Eigen::Map<const Eigen::RowVectorXd>(kept_loglik[c].data(), m.cols());
    }
    r.psrf = psrf(m);
    r.converged = r.psrf->value < kPsrfThreshold;
  } else {
    r.converged = true;
  }

  const auto best = std::max_element(r.pooled_loglik.begin(), r.pooled_loglik.end());
  r.max_loglik = *best;
  const auto pivot_index = static_cast<std::size_t>(best - r.pooled_loglik.begin());
  if (config.relabel == RelabelMethod::kPivot) {
    const Eigen::RowVectorXd mean = data.y.colwise().mean();
    Eigen::VectorXd scale =
        ((data.y.rowwise() - mean).colwise().squaredNorm() / static_cast<double>(data.n()))
            .cwiseSqrt()
            .transpose();
    for (Eigen::Index j = 0; j < scale.size(); ++j) {
      if (!(scale[j] > 0.0)) scale[j] = 1.0;
    }
    const MixtureModel pivot = r.pooled[pivot_index];
    r.pooled = relabel_to_pivot(r.pooled, pivot, scale).draws;
  } else {
    r.pooled = relabel_by_weights(r.pooled).draws;
  }

  r.summary = summarize(r.pooled);
  r.posterior_mean = r.summary.mean_model();

  const std::size_t T = r.pooled.size();
  const std::size_t step =
      std::max<std::size_t>(1, (T + static_cast<std::size_t>(config.membership_draws) - 1) /
                                   static_cast<std::size_t>(config.membership_draws));
  r.membership = Eigen::MatrixXd::Zero(data.n(), G);
  std::size_t used = 0;
  for (std::size_t t = step - 1; t < T; t += step) {
    r.membership += membership_probabilities(r.pooled[t], data.y);
    ++used;
  }
  r.membership /= static_cast<double>(used);
  r.classification.resize(data.n());
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    Eigen::Index k = 0;
    r.membership.row(i).maxCoeff(&k);
    r.classification[i] = static_cast<int>(k) + 1;
  }
  return r;
}

}  // namespace mnig
