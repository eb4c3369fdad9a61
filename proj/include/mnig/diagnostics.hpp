#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "mnig/mnig_core.hpp"

namespace mnig {

inline constexpr double kPsrfThreshold = 1.1;

struct PsrfResult {
  double value = 1.0;
  /// Every chain was constant (W = 0); value is 1.0 by convention.
  bool constant_chains = false;
};

/// Gelman-Rubin potential scale reduction factor for a C x T trace matrix
/// (one chain per row): sqrt(((T-1)/T W + B/T) / W).
PsrfResult psrf(const Eigen::Ref<const Eigen::MatrixXd>& trace);

/// Number of leading entries discarded from a trace of length T.
std::size_t burnin_count(std::size_t length, double fraction);

/// Drops the first floor(T * fraction) entries. Throws std::invalid_argument
/// unless fraction is in (0, 1) and at least two entries remain.
template <typename T>
std::vector<T> apply_burnin(const std::vector<T>& trace, double fraction) {
  const std::size_t drop = burnin_count(trace.size(), fraction);
  return std::vector<T>(trace.begin() + static_cast<std::ptrdiff_t>(drop), trace.end());
}

/// Column-wise burn-in for a C x T trace matrix.
Eigen::MatrixXd apply_burnin(const Eigen::Ref<const Eigen::MatrixXd>& trace, double fraction);

/// Keeps the last `keep` entries; the identity when the trace already has
/// that length.
template <typename T>
std::vector<T> retain_tail(const std::vector<T>& trace, std::size_t keep) {
  if (keep > trace.size()) throw std::invalid_argument("retain_tail: trace too short");
  return std::vector<T>(trace.end() - static_cast<std::ptrdiff_t>(keep), trace.end());
}

/// perm[k] is the old index of the component placed at position k.
using Permutation = std::vector<int>;

MixtureModel permute(const MixtureModel& model, const Permutation& perm);
Eigen::MatrixXd permute_columns(const Eigen::Ref<const Eigen::MatrixXd>& m,
                                const Permutation& perm);

/// Ascending mixing weight; ties by first coordinate of mu, then by index.
Permutation weight_order(const MixtureModel& model);

struct RelabelResult {
  std::vector<MixtureModel> draws;
  std::vector<Permutation> permutations;
};

/// Canonicalizes every draw independently by weight_order.
RelabelResult relabel_by_weights(const std::vector<MixtureModel>& draws);

/// Same permutation applied to a per-draw membership matrix (n x G).
std::vector<Eigen::MatrixXd> relabel_memberships(const std::vector<Eigen::MatrixXd>& z,
                                                 const std::vector<Permutation>& permutations);

/// Minimum-cost assignment for a square cost matrix (Hungarian method).
/// Returns perm with perm[row] = assigned column.
Permutation min_cost_assignment(const Eigen::Ref<const Eigen::MatrixXd>& cost);

/// Aligns each draw to a reference labelling by minimizing the summed squared
/// scaled distance between component locations. The pivot is first put in
/// weight order, so the output labelling is weight-ordered at the pivot.
RelabelResult relabel_to_pivot(const std::vector<MixtureModel>& draws, const MixtureModel& pivot,
                               const Eigen::Ref<const Eigen::VectorXd>& scale);

struct Interval {
  double mean = 0.0;
  double lower = 0.0;  // 2.5th percentile
  double upper = 0.0;  // 97.5th percentile
};

/// Empirical quantile with linear interpolation between order statistics
/// (h = (N-1) p). `sorted` must be ascending.
double quantile_sorted(const std::vector<double>& sorted, double p);

/// Mean and 95% equal-tailed interval. The mean is summed in sorted order,
/// so the result does not depend on the order of the input.
Interval summarize_scalar(std::vector<double> values);

struct ComponentSummary {
  Interval weight;
  std::vector<Interval> mu;
  std::vector<Interval> beta;
  Interval delta;
  Interval gamma;
  std::vector<Interval> Delta;  // row-major, d * d
};

struct PosteriorSummary {
  std::vector<ComponentSummary> components;

  /// Plug-in model at the posterior means. The averaged Delta is rescaled to
  /// unit determinant and the weights renormalized.
  MixtureModel mean_model() const;
};

/// Throws std::invalid_argument on fewer than two draws.
PosteriorSummary summarize(const std::vector<MixtureModel>& draws);

}  // namespace mnig
