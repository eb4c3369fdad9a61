#include "mnig/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mnig {

PsrfResult psrf(const Eigen::Ref<const Eigen::MatrixXd>& trace) {
  const auto chains = trace.rows();
  const auto length = trace.cols();
  if (chains < 2 || length < 2) {
    throw std::invalid_argument("psrf: need at least two chains of length two");
  }
  if (!trace.allFinite()) throw std::invalid_argument("psrf: non-finite trace values");
  const double T = static_cast<double>(length);
  const Eigen::VectorXd means = trace.rowwise().mean();
  const double grand = means.mean();
  double within = 0.0;
  for (Eigen::Index c = 0; c < chains; ++c) {
    within += (trace.row(c).array() - means[c]).square().sum() / (T - 1.0);
  }
  within /= static_cast<double>(chains);
  // B / T is the variance of the chain means.
  const double between_over_t =
      (means.array() - grand).square().sum() / static_cast<double>(chains - 1);
  if (within == 0.0) return PsrfResult{1.0, true};
  const double pooled = (T - 1.0) / T * within + between_over_t;
  return PsrfResult{std::sqrt(pooled / within), false};
}

std::size_t burnin_count(std::size_t length, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("burn-in fraction must lie in (0, 1)");
  }
  const auto drop = static_cast<std::size_t>(std::floor(static_cast<double>(length) * fraction));
  if (length < drop + 2) throw std::invalid_argument("burn-in leaves fewer than two draws");
  return drop;
}

Eigen::MatrixXd apply_burnin(const Eigen::Ref<const Eigen::MatrixXd>& trace, double fraction) {
  const auto drop = static_cast<Eigen::Index>(
      burnin_count(static_cast<std::size_t>(trace.cols()), fraction));
  return trace.rightCols(trace.cols() - drop);
}

MixtureModel permute(const MixtureModel& model, const Permutation& perm) {
  if (perm.size() != model.components.size()) {
    throw std::invalid_argument("permute: permutation size mismatch");
  }
  MixtureModel out{Eigen::VectorXd(model.size()), {}};
  out.components.reserve(perm.size());
  for (std::size_t k = 0; k < perm.size(); ++k) {
    out.weights[static_cast<Eigen::Index>(k)] = model.weights[perm[k]];
    out.components.push_back(model.components[static_cast<std::size_t>(perm[k])]);
  }
  return out;
}

Eigen::MatrixXd permute_columns(const Eigen::Ref<const Eigen::MatrixXd>& m,
                                const Permutation& perm) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (std::size_t k = 0; k < perm.size(); ++k) {
    out.col(static_cast<Eigen::Index>(k)) = m.col(perm[k]);
  }
  return out;
}

Permutation weight_order(const MixtureModel& model) {
  Permutation perm(model.components.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(), [&](int a, int b) {
    if (model.weights[a] != model.weights[b]) return model.weights[a] < model.weights[b];
    return model.components[static_cast<std::size_t>(a)].mu()[0] <
           model.components[static_cast<std::size_t>(b)].mu()[0];
  });
  return perm;
}

RelabelResult relabel_by_weights(const std::vector<MixtureModel>& draws) {
  RelabelResult out;
  out.draws.reserve(draws.size());
  out.permutations.reserve(draws.size());
  for (const auto& draw : draws) {
    auto perm = weight_order(draw);
    out.draws.push_back(permute(draw, perm));
    out.permutations.push_back(std::move(perm));
  }
  return out;
}

std::vector<Eigen::MatrixXd> relabel_memberships(const std::vector<Eigen::MatrixXd>& z,
                                                 const std::vector<Permutation>& permutations) {
  if (z.size() != permutations.size()) {
    throw std::invalid_argument("relabel_memberships: size mismatch");
  }
  std::vector<Eigen::MatrixXd> out;
  out.reserve(z.size());
  for (std::size_t t = 0; t < z.size(); ++t) out.push_back(permute_columns(z[t], permutations[t]));
  return out;
}

Permutation min_cost_assignment(const Eigen::Ref<const Eigen::MatrixXd>& cost) {
  const auto n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw std::invalid_argument("min_cost_assignment: matrix must be square");
  constexpr double inf = std::numeric_limits<double>::infinity();
  // Potentials-based Hungarian method, 1-based internally.
  std::vector<double> u(n + 1, 0.0);
  std::vector<double> v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0);
  std::vector<int> way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  Permutation perm(static_cast<std::size_t>(n));
  for (int j = 1; j <= n; ++j) perm[static_cast<std::size_t>(match[j] - 1)] = j - 1;
  return perm;
}

RelabelResult relabel_to_pivot(const std::vector<MixtureModel>& draws, const MixtureModel& pivot,
                               const Eigen::Ref<const Eigen::VectorXd>& scale) {
  const MixtureModel reference = permute(pivot, weight_order(pivot));
  const auto G = reference.size();
  Eigen::MatrixXd ref_mu(G, reference.dim());
  for (Eigen::Index k = 0; k < G; ++k) {
    ref_mu.row(k) = reference.components[static_cast<std::size_t>(k)]
                        .mu()
                        .cwiseQuotient(scale)
                        .transpose();
  }
  RelabelResult out;
  out.draws.reserve(draws.size());
  out.permutations.reserve(draws.size());
  Eigen::MatrixXd cost(G, G);
  for (const auto& draw : draws) {
    if (draw.size() != G) throw std::invalid_argument("relabel_to_pivot: component count mismatch");
    for (Eigen::Index k = 0; k < G; ++k) {
      for (Eigen::Index g = 0; g < G; ++g) {
        const Eigen::VectorXd m =
            draw.components[static_cast<std::size_t>(g)].mu().cwiseQuotient(scale);
        cost(k, g) = (m - ref_mu.row(k).transpose()).squaredNorm();
      }
    }
    auto perm = min_cost_assignment(cost);
    out.draws.push_back(permute(draw, perm));
    out.permutations.push_back(std::move(perm));
  }
  return out;
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile: empty sample");
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Interval summarize_scalar(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("summarize: empty sample");
  std::sort(values.begin(), values.end());
  const double sum = std::accumulate(values.begin(), values.end(), 0.0);
  return Interval{sum / static_cast<double>(values.size()), quantile_sorted(values, 0.025),
                  quantile_sorted(values, 0.975)};
}

PosteriorSummary summarize(const std::vector<MixtureModel>& draws) {
  if (draws.size() < 2) throw std::invalid_argument("summarize: need at least two draws");
  const auto G = draws.front().size();
  const auto d = draws.front().dim();
  const std::size_t T = draws.size();
  PosteriorSummary out;
  std::vector<double> buf(T);
  auto collect = [&](auto&& extract) {
    for (std::size_t t = 0; t < T; ++t) buf[t] = extract(draws[t]);
    return summarize_scalar(buf);
  };
  for (Eigen::Index g = 0; g < G; ++g) {
    const auto gi = static_cast<std::size_t>(g);
    ComponentSummary cs;
    cs.weight = collect([&](const MixtureModel& m) { return m.weights[g]; });
    cs.delta = collect([&](const MixtureModel& m) { return m.components[gi].delta(); });
    cs.gamma = collect([&](const MixtureModel& m) { return m.components[gi].gamma(); });
    for (Eigen::Index j = 0; j < d; ++j) {
      cs.mu.push_back(collect([&](const MixtureModel& m) { return m.components[gi].mu()[j]; }));
      cs.beta.push_back(
          collect([&](const MixtureModel& m) { return m.components[gi].beta()[j]; }));
    }
    for (Eigen::Index r = 0; r < d; ++r) {
      for (Eigen::Index c = 0; c < d; ++c) {
        cs.Delta.push_back(
            collect([&](const MixtureModel& m) { return m.components[gi].Delta()(r, c); }));
      }
    }
    out.components.push_back(std::move(cs));
  }
  return out;
}

MixtureModel PosteriorSummary::mean_model() const {
  const auto G = static_cast<Eigen::Index>(components.size());
  MixtureModel m{Eigen::VectorXd(G), {}};
  for (Eigen::Index g = 0; g < G; ++g) {
    const auto& cs = components[static_cast<std::size_t>(g)];
    const auto d = static_cast<Eigen::Index>(cs.mu.size());
    Eigen::VectorXd mu(d);
    Eigen::VectorXd beta(d);
    Eigen::MatrixXd Delta(d, d);
    for (Eigen::Index j = 0; j < d; ++j) {
      mu[j] = cs.mu[static_cast<std::size_t>(j)].mean;
      beta[j] = cs.beta[static_cast<std::size_t>(j)].mean;
    }
    for (Eigen::Index r = 0; r < d; ++r) {
      for (Eigen::Index c = 0; c < d; ++c) {
        Delta(r, c) = cs.Delta[static_cast<std::size_t>(r * d + c)].mean;
      }
    }
    m.weights[g] = cs.weight.mean;
    m.components.emplace_back(mu, beta, cs.delta.mean, cs.gamma.mean,
                              normalize_determinant(0.5 * (Delta + Delta.transpose())));
  }
  m.weights /= m.weights.sum();
  return m;
}

}  // namespace mnig
