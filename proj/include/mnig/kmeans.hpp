#pragma once

#include <Eigen/Core>

#include "mnig/rng.hpp"

namespace mnig {

struct KMeansResult {
  Eigen::VectorXi assignment;  // 0-based cluster per row
  Eigen::MatrixXd centers;     // k x d
  double within_ss = 0.0;
};

/// Lloyd's algorithm from k-means++ seeds, best of `restarts` runs by
/// within-cluster sum of squares. Every returned cluster is non-empty.
KMeansResult kmeans(const Eigen::Ref<const Eigen::MatrixXd>& y, int k, RngStream& rng,
                    int restarts = 10, int max_iterations = 100);

}  // namespace mnig
