#pragma once

// ALPCAHUS: K-subspaces alternation whose subspace step is LR-ALPCAH, so each
// cluster is fit with per-sample noise variances. The total cost is
//
//   f = sum_k 1/2 ||(Y_k - L_k R_k') Pi_k^{-1/2}||_F^2 + D/2 log|Pi_k|.
//
// Noise variances belong to samples, not clusters: a reassigned sample keeps
// its nu_i, and its coefficients are refit on the new cluster's factor. With
// that convention every sub-step is a block minimization and the cost trace
// of a trial never increases.

#include "hetsub/core.hpp"
#include "hetsub/ksubspaces.hpp"
#include "hetsub/lr_alpcah.hpp"

namespace hetsub {

struct ClusterModel {
  FactorPair factors;
  Vector nu;              ///< noise variances of the members, in member order
  Matrix basis;           ///< orthonormal basis of range(L)
  std::vector<int> members;
};

struct SubspaceModel {
  std::vector<ClusterModel> clusters;
};

/// Sum of cost_fk over the clusters of `labels`.
inline double total_cost(const Matrix& y, const SubspaceModel& m, const Labels& labels) {
  const int k_count = static_cast<int>(m.clusters.size());
  require(static_cast<Eigen::Index>(labels.size()) == y.cols(), "total_cost: label count");
  check_labels(labels, k_count);
  double total = 0.0;
  for (int k = 0; k < k_count; ++k) {
    const auto idx = members_of(labels, k);
    if (idx.empty()) continue;
    total += cost_fk(select_columns(y, idx), m.clusters[k].factors, m.clusters[k].nu);
  }
  return total;
}

struct AlpcahusTrialOptions {
  std::vector<int> ranks{3};  ///< one entry (uniform) or one per cluster
  int lr_iterations = kDefaultLrIterations;  ///< T1
  double alpha = kDefaultAlpha;
  Weighting weighting = Weighting::inverse;
};

inline std::vector<int> expand_ranks(const std::vector<int>& ranks, int k) {
  require(!ranks.empty(), "ranks: empty");
  require(ranks.size() == 1 || static_cast<int>(ranks.size()) == k,
          "ranks: need one value or one per cluster");
  for (int r : ranks) require(r >= 1, "ranks: must be >= 1");
  return ranks.size() == 1 ? std::vector<int>(static_cast<std::size_t>(k), ranks[0]) : ranks;
}

/// LR-ALPCAH subspace step with state carried across rounds.
class AlpcahStep {
 public:
  AlpcahStep(int clusters, AlpcahusTrialOptions opt)
      : opt_(std::move(opt)), ranks_(expand_ranks(opt_.ranks, clusters)),
        clusters_(static_cast<std::size_t>(clusters)) {}

  double start(const Matrix& y, const Labels& labels) {
    nu_ = Vector::Ones(y.cols());
    double total = 0.0;
    for (std::size_t k = 0; k < clusters_.size(); ++k) {
      auto& c = clusters_[k];
      c.members = members_of(labels, static_cast<int>(k));
      if (c.members.empty()) {
        c.factors = {Matrix::Zero(y.rows(), 0), Matrix::Zero(0, 0)};
        c.nu.resize(0);
        continue;
      }
      const Matrix yk = select_columns(y, c.members);
      const int r = std::min<int>(ranks_[k], static_cast<int>(std::min(yk.rows(), yk.cols())));
      c.factors = svd_init(yk, r);
      c.nu = Vector::Ones(yk.cols());
      total += cost_fk(yk, c.factors, c.nu);
    }
    return total;
  }

  std::vector<Matrix> fit(const Matrix& y, const Labels& labels, std::vector<double>& trace) {
    (void)labels;
    std::vector<Matrix> data(clusters_.size());
    for (std::size_t k = 0; k < clusters_.size(); ++k) {
      auto& c = clusters_[k];
      if (c.members.empty()) continue;
      data[k] = select_columns(y, c.members);
      grow_rank(data[k], c, ranks_[k]);
    }
    LrAlpcahOptions lr;
    lr.iterations = 1;
    lr.alpha = opt_.alpha;
    lr.weighting = opt_.weighting;
    for (int t = 0; t < opt_.lr_iterations; ++t) {
      double total = 0.0;
      for (std::size_t k = 0; k < clusters_.size(); ++k) {
        auto& c = clusters_[k];
        if (c.members.empty() || c.factors.rank() == 0) continue;
        LrAlpcahState s{std::move(c.factors), std::move(c.nu)};
        lr_alpcah_iterate(data[k], s, lr, &diag_);
        c.factors = std::move(s.factors);
        c.nu = std::move(s.nu);
        total += cost_fk(data[k], c.factors, c.nu);
      }
      trace.push_back(total);
    }
    std::vector<Matrix> bases(clusters_.size());
    for (std::size_t k = 0; k < clusters_.size(); ++k) {
      auto& c = clusters_[k];
      for (std::size_t j = 0; j < c.members.size(); ++j) nu_(c.members[j]) = c.nu(j);
      c.basis = basis_or_empty(c.factors.left, y.rows());
      bases[k] = c.basis;
    }
    return bases;
  }

  double cost_after_assign(const Matrix& y, const Labels& labels) {
    double total = 0.0;
    for (std::size_t k = 0; k < clusters_.size(); ++k) {
      auto& c = clusters_[k];
      c.members = members_of(labels, static_cast<int>(k));
      c.nu.resize(static_cast<Eigen::Index>(c.members.size()));
      for (std::size_t j = 0; j < c.members.size(); ++j) c.nu(j) = nu_(c.members[j]);
      if (c.members.empty()) {
        c.factors.right = Matrix::Zero(0, c.factors.rank());
        continue;
      }
      const Matrix yk = select_columns(y, c.members);
      if (c.factors.rank() == 0) {
        c.factors.right = Matrix::Zero(yk.cols(), 0);
      } else {
        c.factors.right = update_factor_R(yk, c.factors.left, &diag_);
      }
      total += cost_fk(yk, c.factors, c.nu);
    }
    return total;
  }

  /// Truncates each cluster's current estimate L R' to the new rank.
  void set_ranks(const Matrix& y, const Labels& labels, const std::vector<int>& ranks) {
    (void)labels;
    for (std::size_t k = 0; k < clusters_.size(); ++k) {
      auto& c = clusters_[k];
      if (ranks[k] < c.factors.rank() && !c.members.empty()) {
        const Matrix yk = select_columns(y, c.members);
        const Matrix x = c.factors.product();
        const int r = std::max(1, ranks[k]);
        c.factors = svd_init(x, std::min<int>(r, static_cast<int>(std::min(x.rows(), x.cols()))));
        c.factors.right = update_factor_R(yk, c.factors.left, &diag_);
      }
    }
    ranks_ = ranks;
  }

  std::vector<int> ranks() const { return ranks_; }
  const Vector& noise() const { return nu_; }
  int ridge_solves() const { return diag_.ridge_solves; }

  SubspaceModel model() const {
    SubspaceModel m;
    m.clusters = clusters_;
    return m;
  }

 private:
  static Matrix basis_or_empty(const Matrix& l, Eigen::Index d) {
    if (l.cols() == 0 || !(l.norm() > 0.0)) return Matrix::Zero(d, 0);
    return orthonormal_basis(l);
  }

  // A cluster that was initialized with fewer samples than its rank gets the
  // missing columns from the top directions of its residual. The added
  // component projects every residual column, so the cost cannot rise.
  void grow_rank(const Matrix& yk, ClusterModel& c, int target) {
    const int cap = static_cast<int>(std::min<Eigen::Index>(target, std::min(yk.rows(), yk.cols())));
    const int missing = cap - static_cast<int>(c.factors.rank());
    if (missing <= 0) return;
    const Matrix resid = yk - c.factors.product();
    if (!(resid.norm() > 0.0)) return;
    const auto svd = linalg::thin_svd(resid);
    const Matrix u = svd.u.leftCols(missing);
    Matrix left(yk.rows(), cap), right(yk.cols(), cap);
    left << c.factors.left, u;
    right << c.factors.right, resid.transpose() * u;
    c.factors = {std::move(left), std::move(right)};
  }

  AlpcahusTrialOptions opt_;
  std::vector<int> ranks_;
  std::vector<ClusterModel> clusters_;
  Vector nu_;
  linalg::SolveDiagnostics diag_;
};

struct AlpcahusTrialResult {
  TrialResult trial;
  SubspaceModel model;
  Vector nu;  ///< per-sample noise variances
  int ridge_solves = 0;
};

inline AlpcahusTrialResult alpcahus_trial(const Matrix& y, int k, const Labels& init,
                                          const AlpcahusTrialOptions& opt,
                                          const TrialOptions& topt, Rng& rng) {
  AlpcahStep step(k, opt);
  AlpcahusTrialResult out;
  out.trial = run_trial(y, k, init, step, topt, rng);
  out.model = step.model();
  out.nu = step.noise();
  out.ridge_solves = step.ridge_solves();
  return out;
}

inline constexpr int kDefaultEnsembleRounds = 3;
inline constexpr int kDefaultSingleRounds = 50;

struct AlpcahusOptions {
  EnsembleOptions ensemble{};
  AlpcahusTrialOptions trial{};
};

/// T2 default: 3 rounds inside an ensemble, 50 (with early stopping) for B = 1.
inline int default_rounds(int base_clusterings) {
  return base_clusterings > 1 ? kDefaultEnsembleRounds : kDefaultSingleRounds;
}

/// Full ALPCAHUS. `make_step` may be replaced to swap the subspace step while
/// keeping the ensemble plumbing.
template <class StepFactory>
EnsembleResult alpcahus_ensemble(const Matrix& y, const AlpcahusOptions& opt, std::uint64_t seed,
                                 StepFactory&& make_step) {
  return run_ensemble(y, opt.ensemble, seed, std::forward<StepFactory>(make_step));
}

inline EnsembleResult alpcahus_ensemble(const Matrix& y, const AlpcahusOptions& opt,
                                        std::uint64_t seed) {
  return alpcahus_ensemble(y, opt, seed,
                           [&] { return AlpcahStep(opt.ensemble.clusters, opt.trial); });
}

}  // namespace hetsub
