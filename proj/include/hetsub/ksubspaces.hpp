#pragma once

// Alternating subspace clustering scaffold shared by ALPCAHUS and the
// K-subspaces baselines. A trial alternates a pluggable subspace step with
// nearest-subspace reassignment; an ensemble combines trials through a
// co-association matrix and spectral clustering.

#include "hetsub/core.hpp"
#include "hetsub/linalg.hpp"
#include "hetsub/rank.hpp"
#include "hetsub/spectral.hpp"

#include <cmath>
#include <concepts>
#include <optional>

namespace hetsub {

inline constexpr double kTieTolerance = 1e-12;

/// K x N matrix of squared projection residuals J_i(k).
inline Matrix residual_table(const Matrix& y, const std::vector<Matrix>& bases) {
  Matrix j(static_cast<Eigen::Index>(bases.size()), y.cols());
  for (std::size_t k = 0; k < bases.size(); ++k)
    j.row(static_cast<Eigen::Index>(k)) = linalg::projection_residuals(y, bases[k]).transpose();
  return j;
}

/// Nearest-subspace labels with the anti-cycling tie rule: a sample keeps
/// its previous label whenever that label attains the minimum residual, and
/// otherwise takes the smallest minimizing index. Residuals within
/// 1e-12 * ||y_i||^2 of the minimum count as attaining it.
inline Labels assign_clusters(const Matrix& y, const std::vector<Matrix>& bases,
                              const std::optional<Labels>& prev = std::nullopt) {
  require(!bases.empty(), "assign_clusters: no bases");
  for (const auto& b : bases) require(b.rows() == y.rows(), "assign_clusters: basis dimension");
  if (prev) require(static_cast<Eigen::Index>(prev->size()) == y.cols(), "assign_clusters: label count");
  const Matrix j = residual_table(y, bases);
  const Eigen::Index n = y.cols();
  Labels out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double jmin = j.col(i).minCoeff();
    const double tol = kTieTolerance * y.col(i).squaredNorm();
    const int before = prev ? (*prev)[i] : -1;
    if (before >= 0 && before < j.rows() && j(before, i) <= jmin + tol) {
      out[i] = before;
      continue;
    }
    int k = 0;
    while (j(k, i) > jmin + tol) ++k;
    out[i] = k;
  }
  return out;
}

/// Refills empty clusters: each empty cluster receives the sample with the
/// largest residual under its current subspace, taken from a cluster with
/// more than one member. Returns the number of moved samples.
inline int repair_empty_clusters(const Matrix& y, const std::vector<Matrix>& bases,
                                 Labels& labels, int k_count) {
  std::vector<int> sizes(static_cast<std::size_t>(k_count), 0);
  for (int c : labels) ++sizes[c];
  if (std::find(sizes.begin(), sizes.end(), 0) == sizes.end()) return 0;
  Vector own(y.cols());
  for (Eigen::Index i = 0; i < y.cols(); ++i) {
    const auto& b = bases[labels[i]];
    own(i) = b.cols() == 0 ? y.col(i).squaredNorm()
                           : (y.col(i) - b * (b.transpose() * y.col(i))).squaredNorm();
  }
  int moved = 0;
  for (int k = 0; k < k_count; ++k) {
    if (sizes[k] > 0) continue;
    Eigen::Index pick = -1;
    for (Eigen::Index i = 0; i < y.cols(); ++i) {
      if (sizes[labels[i]] <= 1) continue;
      if (pick < 0 || own(i) > own(pick)) pick = i;
    }
    if (pick < 0) break;  // fewer samples than clusters
    --sizes[labels[pick]];
    labels[pick] = k;
    ++sizes[k];
    own(pick) = -1.0;
    ++moved;
  }
  return moved;
}

/// Near-balanced random partition: cluster sizes differ by at most one.
inline Labels random_init(int n, int k, Rng& rng) {
  require(k >= 1 && n >= k, "random_init: need N >= K >= 1");
  Labels labels(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) labels[i] = i % k;
  std::shuffle(labels.begin(), labels.end(), rng);
  return labels;
}

/// Nearest-subspace labels against K independent random subspaces of
/// dimensions `ranks` (one value or one per cluster; capped at D).
inline Labels random_subspace_init(const Matrix& y, int k, const std::vector<int>& ranks, Rng& rng) {
  require(k >= 1 && k <= y.cols(), "random_subspace_init: need N >= K >= 1");
  require(ranks.size() == 1 || static_cast<int>(ranks.size()) == k,
          "random_subspace_init: need one rank or one per cluster");
  std::vector<Matrix> bases;
  for (int c = 0; c < k; ++c) {
    const int r = ranks.size() == 1 ? ranks[0] : ranks[c];
    require(r >= 1, "random_subspace_init: ranks must be >= 1");
    bases.push_back(random_subspace(static_cast<int>(y.rows()), std::min<int>(r, static_cast<int>(y.rows())), rng));
  }
  return assign_clusters(y, bases);
}

/// A_ij = fraction of runs in which samples i and j share a label.
inline Matrix coassociation(const std::vector<Labels>& runs) {
  if (runs.empty()) throw std::invalid_argument("coassociation: no runs");
  const std::size_t n = runs.front().size();
  for (const auto& r : runs) require(r.size() == n, "coassociation: length mismatch");
  Matrix a = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (const auto& r : runs)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j)
        if (r[i] == r[j]) a(i, j) += 1.0;
  a /= static_cast<double>(runs.size());
  a.triangularView<Eigen::StrictlyLower>() = a.transpose();
  return a;
}

/// TIPS affinity: W_ij = |<y_i, y_j>| off the diagonal, zero on it.
inline Matrix inner_product_affinity(const Matrix& y) {
  Matrix w = (y.transpose() * y).cwiseAbs();
  w.diagonal().setZero();
  return w;
}

/// Spectral initialization from the row-thresholded absolute inner-product
/// affinity, symmetrized as (Z + Z')/2.
inline Labels tips_init(const Matrix& y, int k, int q, Rng& rng, const KMeansOptions& km = {}) {
  require(q >= 1, "tips_init: q must be >= 1");
  require(k >= 1 && k <= y.cols(), "tips_init: need N >= K >= 1");
  const Matrix z = threshold_top_q_rows(inner_product_affinity(y), std::min<int>(q, y.cols()));
  return spectral_cluster(0.5 * (z + z.transpose()), k, rng, km);
}

/// Consensus labels from an ensemble: co-association with the diagonal
/// cleared, top-q row and column thresholding, averaging, spectral clustering.
inline Labels consensus_cluster(const std::vector<Labels>& runs, int k, int q, Rng& rng,
                                const KMeansOptions& km = {}) {
  Matrix a = coassociation(runs);
  a.diagonal().setZero();
  const int qq = std::min<int>(q, a.cols());
  const Matrix w = symmetrize_avg(threshold_top_q_rows(a, qq), threshold_top_q_cols(a, qq));
  return spectral_cluster(w, k, rng, km);
}

/// Contract for the subspace-estimation half of a trial.
///  start: set up from the initial labels; returns the initial cost.
///  fit: re-estimate every cluster, appending each evaluated cost to `trace`;
///       returns one orthonormal basis per cluster.
///  cost_after_assign: adopt new labels and return the resulting cost.
///  set_ranks: change per-cluster ranks (adaptive shrinking).
template <class S>
concept SubspaceStep = requires(S s, const Matrix& y, const Labels& c, std::vector<double>& trace,
                                const std::vector<int>& ranks) {
  { s.start(y, c) } -> std::convertible_to<double>;
  { s.fit(y, c, trace) } -> std::same_as<std::vector<Matrix>>;
  { s.cost_after_assign(y, c) } -> std::convertible_to<double>;
  { s.set_ranks(y, c, ranks) };
  { s.ranks() } -> std::convertible_to<std::vector<int>>;
};

struct TrialOptions {
  int max_rounds = 50;  ///< T2
  /// Adaptive rank shrinking, applied after reassignment on rounds 1 and
  /// ceil(T2 / 2).
  std::optional<ShrinkOptions> shrink;
};

struct TrialResult {
  Labels labels;
  std::vector<Matrix> bases;      ///< bases used for the final reassignment
  std::vector<double> cost_trace;
  /// Trace indices that start a new segment because ranks were shrunk or an
  /// empty cluster was refilled; monotonicity holds between them.
  std::vector<std::size_t> reseed_points;
  std::vector<int> ranks;
  int rounds = 0;
  int repairs = 0;
  bool converged = false;
};

template <SubspaceStep Step>
TrialResult run_trial(const Matrix& y, int k, Labels init, Step& step, const TrialOptions& opt,
                      Rng& rng) {
  require(static_cast<Eigen::Index>(init.size()) == y.cols(), "trial: init length");
  require(opt.max_rounds >= 1, "trial: max_rounds must be >= 1");
  check_labels(init, k);

  TrialResult out;
  // Initial labelings with empty clusters are balanced by moving samples off
  // the largest clusters.
  {
    std::vector<int> sizes(static_cast<std::size_t>(k), 0);
    for (int c : init) ++sizes[c];
    for (int c = 0; c < k; ++c) {
      if (sizes[c] > 0) continue;
      const int big = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
      if (sizes[big] <= 1) break;
      for (auto it = init.rbegin(); it != init.rend(); ++it)
        if (*it == big) {
          *it = c;
          break;
        }
      --sizes[big];
      ++sizes[c];
      ++out.repairs;
    }
  }

  Labels labels = std::move(init);
  out.cost_trace.push_back(step.start(y, labels));
  const int mid_round = (opt.max_rounds + 1) / 2;
  for (int round = 1; round <= opt.max_rounds; ++round) {
    out.bases = step.fit(y, labels, out.cost_trace);
    Labels next = assign_clusters(y, out.bases, labels);
    const int moved = repair_empty_clusters(y, out.bases, next, k);
    if (moved > 0) {
      out.repairs += moved;
      out.reseed_points.push_back(out.cost_trace.size());
    }
    out.cost_trace.push_back(step.cost_after_assign(y, next));
    out.rounds = round;

    bool ranks_changed = false;
    if (opt.shrink && (round == 1 || round == mid_round)) {
      const auto before = step.ranks();
      const auto after = adaptive_shrink(y, next, before, rng, *opt.shrink);
      if (after != before) {
        step.set_ranks(y, next, after);
        out.reseed_points.push_back(out.cost_trace.size());
        out.cost_trace.push_back(step.cost_after_assign(y, next));
        ranks_changed = true;
      }
    }

    const bool same = next == labels;
    labels = std::move(next);
    if (same && !ranks_changed) {
      out.converged = true;
      break;
    }
  }
  out.labels = std::move(labels);
  out.ranks = step.ranks();
  return out;
}

/// random: nearest of K random subspaces. partition: balanced random labels.
/// tips: spectral initialization, single-trial runs only.
enum class InitMethod { random, partition, tips };

struct EnsembleOptions {
  int clusters = 2;           ///< K
  int base_clusterings = 1;   ///< B
  int q = 3;                  ///< threshold for consensus (and TIPS)
  InitMethod init = InitMethod::random;
  std::vector<int> init_ranks{3};  ///< subspace dimensions for random init
  TrialOptions trial{};
  KMeansOptions kmeans{};
  int jobs = 1;
};

struct EnsembleResult {
  Labels labels;
  std::vector<TrialResult> trials;
};

/// B independent trials on child streams seed ^ b, then consensus on stream
/// seed ^ B. TIPS is used only when B = 1 (B > 1 falls back to random
/// subspaces); B = 1 returns the single trial's labels.
template <class StepFactory>
EnsembleResult run_ensemble(const Matrix& y, const EnsembleOptions& opt, std::uint64_t seed,
                            StepFactory&& make_step) {
  require(opt.base_clusterings >= 1, "ensemble: B must be >= 1");
  require(opt.clusters >= 1 && opt.clusters <= y.cols(), "ensemble: need N >= K >= 1");
  require(opt.q >= 1, "ensemble: q must be >= 1");
  const int b_count = opt.base_clusterings;
  EnsembleResult out;
  out.trials.resize(static_cast<std::size_t>(b_count));
  parallel_for(b_count, opt.jobs, [&](int b) {
    Rng rng = make_rng(child_seed(seed, static_cast<std::uint64_t>(b)));
    Labels init;
    if (opt.init == InitMethod::tips && b_count == 1)
      init = tips_init(y, opt.clusters, opt.q, rng, opt.kmeans);
    else if (opt.init == InitMethod::partition)
      init = random_init(static_cast<int>(y.cols()), opt.clusters, rng);
    else
      init = random_subspace_init(y, opt.clusters, opt.init_ranks, rng);
    auto step = make_step();
    out.trials[b] = run_trial(y, opt.clusters, std::move(init), step, opt.trial, rng);
  });
  if (b_count == 1) {
    out.labels = out.trials.front().labels;
    return out;
  }
  std::vector<Labels> runs;
  runs.reserve(out.trials.size());
  for (const auto& t : out.trials) runs.push_back(t.labels);
  Rng rng = make_rng(child_seed(seed, static_cast<std::uint64_t>(b_count)));
  out.labels = consensus_cluster(runs, opt.clusters, opt.q, rng, opt.kmeans);
  return out;
}

}  // namespace hetsub
