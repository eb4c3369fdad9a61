#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mnig/gibbs.hpp"

namespace mnig {

/// Mixing weights, mu, beta, delta, gamma and a unit-determinant Delta.
long count_free_params(int G, int d);

double bic(double loglik, long k, long n);
double aic(double loglik, long k);

struct ContingencyTable {
  std::vector<int> row_labels;  // sorted distinct labels of the first argument
  std::vector<int> col_labels;
  Eigen::MatrixXi counts;
};

ContingencyTable contingency_table(const Eigen::Ref<const Eigen::VectorXi>& a,
                                   const Eigen::Ref<const Eigen::VectorXi>& b);

struct AriResult {
  double value = 0.0;
  /// The chance-corrected denominator vanished; value is 0 by convention.
  bool degenerate = false;
};

AriResult adjusted_rand(const Eigen::Ref<const Eigen::VectorXi>& a,
                        const Eigen::Ref<const Eigen::VectorXi>& b);

inline double adjusted_rand_index(const Eigen::Ref<const Eigen::VectorXi>& a,
                                  const Eigen::Ref<const Eigen::VectorXi>& b) {
  return adjusted_rand(a, b).value;
}

struct SelectionRow {
  int G = 0;
  double max_loglik = 0.0;
  long n_params = 0;
  double bic = 0.0;
  double aic = 0.0;
  bool converged = false;
  std::optional<double> psrf;
  std::optional<std::string> error;  // set when the fit failed
};

struct SelectionResult {
  std::vector<SelectionRow> table;
  int best_G = 0;
  /// False when no fit converged and the best row was picked among all
  /// finished fits.
  bool best_converged = false;
  std::vector<FitResult> fits;  // successful fits, ascending G

  const FitResult& best() const;
  const FitResult* fit_for(int G) const;
};

/// Fits every G in [g_min, g_max] and picks the smallest BIC among converged
/// fits, preferring the smaller G on ties. Throws FitError if every fit fails.
SelectionResult select_model(const Dataset& data, int g_min, int g_max,
                             const PriorOptions& prior, const GibbsConfig& config);

}  // namespace mnig
