#include "mnig/model_selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mnig {
namespace {

std::vector<int> distinct(const Eigen::Ref<const Eigen::VectorXi>& v) {
  std::vector<int> out(v.data(), v.data() + v.size());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

int index_of(const std::vector<int>& sorted, int label) {
  return static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), label) - sorted.begin());
}

}  // namespace

long count_free_params(int G, int d) {
  if (G < 1 || d < 1) throw std::invalid_argument("count_free_params: need G, d >= 1");
  const long per = 2L * d + 2 + static_cast<long>(d) * (d + 1) / 2 - 1;
  return (G - 1) + static_cast<long>(G) * per;
}

double bic(double loglik, long k, long n) {
  if (n < 1) throw std::invalid_argument("bic: need n >= 1");
  return -2.0 * loglik + static_cast<double>(k) * std::log(static_cast<double>(n));
}

double aic(double loglik, long k) { return -2.0 * loglik + 2.0 * static_cast<double>(k); }

ContingencyTable contingency_table(const Eigen::Ref<const Eigen::VectorXi>& a,
                                   const Eigen::Ref<const Eigen::VectorXi>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("contingency table: length mismatch");
  ContingencyTable t;
  t.row_labels = distinct(a);
  t.col_labels = distinct(b);
  t.counts = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(t.row_labels.size()),
                                   static_cast<Eigen::Index>(t.col_labels.size()));
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    t.counts(index_of(t.row_labels, a[i]), index_of(t.col_labels, b[i])) += 1;
  }
  return t;
}

AriResult adjusted_rand(const Eigen::Ref<const Eigen::VectorXi>& a,
                        const Eigen::Ref<const Eigen::VectorXi>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("adjusted_rand: length mismatch");
  if (a.size() < 2) throw std::invalid_argument("adjusted_rand: need at least two items");
  const auto t = contingency_table(a, b);
  // Pair counts are integers; the ratio is formed from exact integer
  // numerator and denominator scaled by 2 C(n, 2).
  __extension__ typedef __int128 Wide;
  auto pairs = [](Wide m) { return m * (m - 1) / 2; };
  Wide index = 0;
  for (Eigen::Index i = 0; i < t.counts.rows(); ++i) {
    for (Eigen::Index j = 0; j < t.counts.cols(); ++j) index += pairs(t.counts(i, j));
  }
  Wide sum_a = 0;
  Wide sum_b = 0;
  for (Eigen::Index i = 0; i < t.counts.rows(); ++i) sum_a += pairs(t.counts.row(i).sum());
  for (Eigen::Index j = 0; j < t.counts.cols(); ++j) sum_b += pairs(t.counts.col(j).sum());
  const Wide total = pairs(static_cast<Wide>(a.size()));
  const Wide num = 2 * (total * index - sum_a * sum_b);
  const Wide den = total * (sum_a + sum_b) - 2 * sum_a * sum_b;
  if (den == 0) return AriResult{0.0, true};
  return AriResult{static_cast<double>(static_cast<long double>(num) / static_cast<long double>(den)),
                   false};
}

const FitResult& SelectionResult::best() const {
  const FitResult* f = fit_for(best_G);
  if (!f) throw std::logic_error("selection result holds no fit for the best G");
  return *f;
}

const FitResult* SelectionResult::fit_for(int G) const {
  for (const auto& f : fits) {
    if (f.G == G) return &f;
  }
  return nullptr;
}

SelectionResult select_model(const Dataset& data, int g_min, int g_max,
                             const PriorOptions& prior, const GibbsConfig& config) {
  if (g_min < 1 || g_max < g_min) throw std::invalid_argument("select_model: empty G range");
  SelectionResult out;
  std::string failures;
  for (int G = g_min; G <= g_max; ++G) {
    SelectionRow row;
    row.G = G;
    row.n_params = count_free_params(G, static_cast<int>(data.dim()));
    try {
      FitResult f = fit(data, G, prior.build(data, G), config);
      row.max_loglik = f.max_loglik;
      row.bic = bic(f.max_loglik, row.n_params, static_cast<long>(data.n()));
      row.aic = aic(f.max_loglik, row.n_params);
      row.converged = f.converged;
      if (f.psrf) row.psrf = f.psrf->value;
      out.fits.push_back(std::move(f));
    } catch (const FitError& e) {
      row.error = e.what();
      row.max_loglik = row.bic = row.aic = std::numeric_limits<double>::quiet_NaN();
      failures += std::string(failures.empty() ? "" : "; ") + e.what();
    }
    out.table.push_back(row);
  }
  if (out.fits.empty()) throw FitError("every fit failed: " + failures);

  auto pick = [&](bool need_converged) {
    int best = 0;
    double best_bic = std::numeric_limits<double>::infinity();
    for (const auto& row : out.table) {
      if (row.error || !std::isfinite(row.bic)) continue;
      if (need_converged && !row.converged) continue;
      if (row.bic < best_bic) {
        best_bic = row.bic;
        best = row.G;
      }
    }
    return best;
  };
  out.best_G = pick(true);
  out.best_converged = out.best_G != 0;
  if (!out.best_converged) out.best_G = pick(false);
  if (out.best_G == 0) throw FitError("no fit produced a finite BIC");
  return out;
}

}  // namespace mnig
