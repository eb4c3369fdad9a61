#include "mnig/mnig_core.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mnig/distributions.hpp"
#include "mnig/special_math.hpp"

namespace mnig {
namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void require(bool ok, const char* what) {
  if (!ok) throw std::domain_error(what);
}

}  // namespace

MnigComponent::MnigComponent(Eigen::VectorXd mu, Eigen::VectorXd beta, double delta,
                             double gamma, Eigen::MatrixXd Delta)
    : mu_(std::move(mu)),
      beta_(std::move(beta)),
      delta_(delta),
      gamma_(gamma),
      Delta_(std::move(Delta)) {
  const auto d = mu_.size();
  require(d >= 1, "MNIG component: dimension must be positive");
  require(beta_.size() == d && Delta_.rows() == d && Delta_.cols() == d,
          "MNIG component: dimension mismatch");
  require(mu_.allFinite() && beta_.allFinite() && Delta_.allFinite(),
          "MNIG component: non-finite parameter");
  require(std::isfinite(delta_) && delta_ > 0.0, "MNIG component: delta must be positive");
  require(std::isfinite(gamma_) && gamma_ > 0.0, "MNIG component: gamma must be positive");
  require((Delta_ - Delta_.transpose()).cwiseAbs().maxCoeff() <=
              1e-10 * (1.0 + Delta_.cwiseAbs().maxCoeff()),
          "MNIG component: Delta must be symmetric");
  factor_.compute(Delta_);
  require(factor_.info() == Eigen::Success, "MNIG component: Delta not positive definite");
  const double det = factor_.matrixLLT().diagonal().array().square().prod();
  require(std::abs(det - 1.0) < kUnitDeterminantTolerance,
          "MNIG component: |Delta| must equal 1");
  Delta_beta_ = Delta_ * beta_;
  alpha_ = std::sqrt(gamma_ * gamma_ + beta_.dot(Delta_beta_));
}

double MnigComponent::mahalanobis_sq(const Eigen::Ref<const Eigen::VectorXd>& y) const {
  const Eigen::VectorXd r = y - mu_;
  return factor_.matrixL().solve(r).squaredNorm();
}

Eigen::VectorXd MnigComponent::mean() const { return mu_ + (delta_ / gamma_) * Delta_beta_; }

void MixtureModel::validate() const {
  require(weights.size() >= 1, "mixture: no components");
  require(static_cast<std::size_t>(weights.size()) == components.size(),
          "mixture: weights and components differ in length");
  require((weights.array() > 0.0).all(), "mixture: weights must be positive");
  require(std::abs(weights.sum() - 1.0) <= 1e-12, "mixture: weights must sum to one");
  for (const auto& c : components) {
    require(c.dim() == components.front().dim(), "mixture: components differ in dimension");
  }
}

SufficientStats SufficientStats::zero(Eigen::Index d) {
  SufficientStats s;
  s.t1 = Eigen::VectorXd::Zero(d);
  s.t2 = Eigen::VectorXd::Zero(d);
  s.t5 = Eigen::MatrixXd::Zero(d, d);
  return s;
}

SufficientStats& SufficientStats::operator+=(const SufficientStats& other) {
  t0 += other.t0;
  t1 += other.t1;
  t2 += other.t2;
  t3 += other.t3;
  t4 += other.t4;
  t5 += other.t5;
  return *this;
}

void Dataset::validate() const {
  require(y.rows() >= 1 && y.cols() >= 1, "dataset: needs at least one row and column");
  require(y.allFinite(), "dataset: missing or non-finite entries");
  if (labels) require(labels->size() == y.rows(), "dataset: label count mismatch");
}

double inverse_gaussian_logpdf(double gamma, double delta, double u) {
  require(u > 0.0, "IG density: u must be positive");
  return std::log(delta) - 0.5 * kLog2Pi + delta * gamma - 1.5 * std::log(u) -
         0.5 * (delta * delta / u + gamma * gamma * u);
}

double mnig_logpdf(const MnigComponent& comp, const Eigen::Ref<const Eigen::VectorXd>& y) {
  require(y.size() == comp.dim(), "mnig_logpdf: dimension mismatch");
  const double d = static_cast<double>(comp.dim());
  const double order = 0.5 * (d + 1.0);
  const double q = std::sqrt(comp.q_sq(y));
  const double alpha = comp.alpha();
  const double p = comp.delta() * comp.gamma() + comp.beta().dot(y - comp.mu());
  return std::log(comp.delta()) - 0.5 * (d - 1.0) * std::numbers::ln2 +
         order * (std::log(alpha) - std::log(std::numbers::pi) - std::log(q)) + p +
         log_bessel_k(order, alpha * q);
}

double mnig_joint_logpdf(const MnigComponent& comp, const Eigen::Ref<const Eigen::VectorXd>& y,
                         double u) {
  require(std::isfinite(u) && u > 0.0, "mnig_joint_logpdf: u must be positive");
  require(y.size() == comp.dim(), "mnig_joint_logpdf: dimension mismatch");
  const double d = static_cast<double>(comp.dim());
  const Eigen::VectorXd r = y - comp.mu();
  const double log_det = 2.0 * comp.Delta_factor().matrixLLT().diagonal().array().log().sum();
  const double beta_delta_beta = comp.alpha() * comp.alpha() - comp.gamma() * comp.gamma();
  const double quad = comp.mahalanobis_sq(y) / u - 2.0 * comp.beta().dot(r) + u * beta_delta_beta;
  const double log_normal = -0.5 * d * (kLog2Pi + std::log(u)) - 0.5 * log_det - 0.5 * quad;
  return log_normal + inverse_gaussian_logpdf(comp.gamma(), comp.delta(), u);
}

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

Eigen::MatrixXd weighted_log_densities(const MixtureModel& model,
                                       const Eigen::Ref<const Eigen::MatrixXd>& y) {
  require(y.cols() == model.dim(), "mixture: data dimension mismatch");
  const auto n = y.rows();
  const auto G = model.size();
  Eigen::MatrixXd out(n, G);
  for (Eigen::Index g = 0; g < G; ++g) {
    const auto& comp = model.components[static_cast<std::size_t>(g)];
    const double log_w = std::log(model.weights[g]);
    for (Eigen::Index i = 0; i < n; ++i) {
      out(i, g) = log_w + mnig_logpdf(comp, y.row(i).transpose());
    }
  }
  return out;
}

double mixture_loglik(const MixtureModel& model, const Dataset& data) {
  const Eigen::MatrixXd lw = weighted_log_densities(model, data.y);
  double total = 0.0;
  for (Eigen::Index i = 0; i < lw.rows(); ++i) total += log_sum_exp(lw.row(i).transpose());
  return total;
}

Eigen::MatrixXd membership_probabilities(const MixtureModel& model,
                                         const Eigen::Ref<const Eigen::MatrixXd>& y) {
  Eigen::MatrixXd lw = weighted_log_densities(model, y);
  for (Eigen::Index i = 0; i < lw.rows(); ++i) {
    const double lse = log_sum_exp(lw.row(i).transpose());
    lw.row(i) = (lw.row(i).array() - lse).exp();
  }
  return lw;
}

std::vector<SufficientStats> accumulate_stats(const Dataset& data,
                                              const Eigen::Ref<const Eigen::MatrixXd>& u,
                                              const Eigen::Ref<const Eigen::MatrixXd>& z) {
  const auto n = data.n();
  const auto d = data.dim();
  const auto G = z.cols();
  require(u.rows() == n && z.rows() == n && u.cols() == G, "accumulate_stats: shape mismatch");
  std::vector<SufficientStats> stats(static_cast<std::size_t>(G), SufficientStats::zero(d));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto yi = data.y.row(i).transpose();
    for (Eigen::Index g = 0; g < G; ++g) {
      const double w = z(i, g);
      if (w == 0.0) continue;
      const double ui = u(i, g);
      require(std::isfinite(ui) && ui > 0.0, "accumulate_stats: u must be positive");
      auto& s = stats[static_cast<std::size_t>(g)];
      s.t0 += w;
      s.t1 += w * yi;
      s.t2 += (w / ui) * yi;
      s.t3 += 0.5 * w * ui;
      s.t4 += 0.5 * w / ui;
      s.t5.noalias() += (0.5 * w / ui) * yi * yi.transpose();
    }
  }
  return stats;
}

Dataset generate_dataset(const MixtureModel& model, Eigen::Index n, RngStream& rng) {
  model.validate();
  require(n >= 1, "generate_dataset: n must be positive");
  const auto d = model.dim();
  Dataset out;
  out.y.resize(n, d);
  Eigen::VectorXi labels(n);
  Eigen::VectorXd eps(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int g = sample_categorical(model.weights, rng);
    const auto& comp = model.components[static_cast<std::size_t>(g)];
    const double u = sample_inverse_gaussian(comp.gamma(), comp.delta(), rng);
    for (Eigen::Index j = 0; j < d; ++j) eps[j] = rng.normal();
    out.y.row(i) = (comp.mu() + u * (comp.Delta() * comp.beta()) +
                    std::sqrt(u) * Eigen::VectorXd(comp.Delta_factor().matrixL() * eps))
                       .transpose();
    labels[i] = g + 1;
  }
  out.labels = std::move(labels);
  return out;
}

Eigen::MatrixXd normalize_determinant(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  require(llt.info() == Eigen::Success, "normalize_determinant: matrix not positive definite");
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double d = static_cast<double>(m.rows());
  Eigen::MatrixXd out = m * std::exp(-log_det / d);
  return 0.5 * (out + out.transpose());
}

MnigComponent affine_transform(const MnigComponent& comp,
                               const Eigen::Ref<const Eigen::VectorXd>& shift,
                               const Eigen::Ref<const Eigen::VectorXd>& scale) {
  const auto d = comp.dim();
  require(shift.size() == d && scale.size() == d, "affine_transform: dimension mismatch");
  require((scale.array() > 0.0).all(), "affine_transform: scales must be positive");
  // c = |S|^{2/d}; U' = c U keeps |Delta'| = 1.
  const double c = std::exp(2.0 * scale.array().log().sum() / static_cast<double>(d));
  const Eigen::MatrixXd scaled = scale.asDiagonal() * comp.Delta() * scale.asDiagonal();
  Eigen::MatrixXd Delta = scaled / c;
  Delta = 0.5 * (Delta + Delta.transpose());
  return MnigComponent(shift + scale.cwiseProduct(comp.mu()), comp.beta().cwiseQuotient(scale),
                       comp.delta() * std::sqrt(c), comp.gamma() / std::sqrt(c),
                       normalize_determinant(Delta));
}

MixtureModel affine_transform(const MixtureModel& model,
                              const Eigen::Ref<const Eigen::VectorXd>& shift,
                              const Eigen::Ref<const Eigen::VectorXd>& scale) {
  MixtureModel out{model.weights, {}};
  out.components.reserve(model.components.size());
  for (const auto& c : model.components) out.components.push_back(affine_transform(c, shift, scale));
  return out;
}

}  // namespace mnig
