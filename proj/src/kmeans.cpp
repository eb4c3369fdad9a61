#include "mnig/kmeans.hpp"

#include <limits>
#include <stdexcept>

namespace mnig {
namespace {

Eigen::MatrixXd plus_plus_seeds(const Eigen::Ref<const Eigen::MatrixXd>& y, int k,
                                RngStream& rng) {
  const auto n = y.rows();
  Eigen::MatrixXd centers(k, y.cols());
  auto first = static_cast<Eigen::Index>(rng.uniform() * static_cast<double>(n));
  if (first >= n) first = n - 1;
  centers.row(0) = y.row(first);
  Eigen::VectorXd dist = (y.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = dist.sum();
    Eigen::Index pick = n - 1;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += dist[i];
        if (target < acc) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.uniform() * static_cast<double>(n));
      if (pick >= n) pick = n - 1;
    }
    centers.row(c) = y.row(pick);
    dist = dist.cwiseMin((y.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }
  return centers;
}

KMeansResult lloyd(const Eigen::Ref<const Eigen::MatrixXd>& y, Eigen::MatrixXd centers,
                   int max_iterations) {
  const auto n = y.rows();
  const auto k = centers.rows();
  KMeansResult r;
  r.assignment = Eigen::VectorXi::Constant(n, -1);
  Eigen::VectorXd best_dist(n);
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      const double dist = (centers.rowwise() - y.row(i)).rowwise().squaredNorm().minCoeff(&best);
      best_dist[i] = dist;
      if (r.assignment[i] != best) {
        r.assignment[i] = static_cast<int>(best);
        changed = true;
      }
    }
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, y.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(r.assignment[i]) += y.row(i);
      counts[r.assignment[i]] += 1.0;
    }
    for (Eigen::Index c = 0; c < k; ++c) {
      if (counts[c] > 0.0) {
        centers.row(c) = sums.row(c) / counts[c];
        continue;
      }
      // Re-seed an empty cluster at the worst-fit point.
      Eigen::Index far = 0;
      best_dist.maxCoeff(&far);
      centers.row(c) = y.row(far);
      best_dist[far] = 0.0;
      changed = true;
    }
    if (!changed) break;
  }
  r.centers = std::move(centers);
  r.within_ss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    r.within_ss += (y.row(i) - r.centers.row(r.assignment[i])).squaredNorm();
  }
  return r;
}

bool all_clusters_used(const Eigen::VectorXi& assignment, int k) {
  Eigen::VectorXi counts = Eigen::VectorXi::Zero(k);
  for (Eigen::Index i = 0; i < assignment.size(); ++i) counts[assignment[i]] += 1;
  return (counts.array() > 0).all();
}

}  // namespace

KMeansResult kmeans(const Eigen::Ref<const Eigen::MatrixXd>& y, int k, RngStream& rng,
                    int restarts, int max_iterations) {
  if (k < 1 || k > y.rows()) throw std::invalid_argument("kmeans: need 1 <= k <= n");
  KMeansResult best;
  best.within_ss = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    auto result = lloyd(y, plus_plus_seeds(y, k, rng), max_iterations);
    if (!all_clusters_used(result.assignment, k)) continue;
    if (result.within_ss < best.within_ss) best = std::move(result);
  }
  if (best.assignment.size() == 0) {
    throw std::runtime_error("kmeans: every restart produced an empty cluster");
  }
  return best;
}

}  // namespace mnig
