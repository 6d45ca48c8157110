#pragma once

// Homoscedastic comparison methods: K-subspaces (KSS), its ensemble (EKSS),
// thresholded subspace clustering (TSC), K-means on raw samples, and the
// noisy oracle that fits each true cluster from its low-noise samples only.

#include "hetsub/alpcahus.hpp"
#include "hetsub/core.hpp"
#include "hetsub/ksubspaces.hpp"
#include "hetsub/linalg.hpp"
#include "hetsub/spectral.hpp"

#include <cmath>

namespace hetsub {

/// Top-d left singular vectors of Y_k (fewer if Y_k has fewer columns).
inline Matrix pca_subspace_step(const Matrix& yk, int rank) {
  require(rank >= 1, "pca_subspace_step: rank must be >= 1");
  require(rank <= std::min(yk.rows(), yk.cols()), "pca_subspace_step: rank exceeds min(D, n)");
  return linalg::thin_svd(yk).u.leftCols(rank);
}

/// PCA subspace step; the trace records the residual sum sum_i J_i(c_i).
class PcaStep {
 public:
  PcaStep(int clusters, std::vector<int> ranks)
      : ranks_(expand_ranks(ranks, clusters)), bases_(static_cast<std::size_t>(clusters)) {}

  double start(const Matrix& y, const Labels& labels) {
    refit(y, labels);
    return residual_sum(y, labels);
  }

  std::vector<Matrix> fit(const Matrix& y, const Labels& labels, std::vector<double>& trace) {
    refit(y, labels);
    trace.push_back(residual_sum(y, labels));
    return bases_;
  }

  double cost_after_assign(const Matrix& y, const Labels& labels) {
    return residual_sum(y, labels);
  }

  void set_ranks(const Matrix&, const Labels&, const std::vector<int>& ranks) { ranks_ = ranks; }
  std::vector<int> ranks() const { return ranks_; }
  const std::vector<Matrix>& bases() const { return bases_; }

 private:
  void refit(const Matrix& y, const Labels& labels) {
    for (std::size_t k = 0; k < bases_.size(); ++k) {
      const auto idx = members_of(labels, static_cast<int>(k));
      if (idx.empty()) {
        if (bases_[k].rows() != y.rows()) bases_[k] = Matrix::Zero(y.rows(), 0);
        continue;
      }
      const Matrix yk = select_columns(y, idx);
      const int r = std::min<int>(ranks_[k], static_cast<int>(std::min(yk.rows(), yk.cols())));
      bases_[k] = pca_subspace_step(yk, r);
    }
  }

  double residual_sum(const Matrix& y, const Labels& labels) const {
    double total = 0.0;
    for (Eigen::Index i = 0; i < y.cols(); ++i) {
      const Matrix& b = bases_[labels[i]];
      total += b.cols() == 0 ? y.col(i).squaredNorm()
                             : (y.col(i) - b * (b.transpose() * y.col(i))).squaredNorm();
    }
    return total;
  }

  std::vector<int> ranks_;
  std::vector<Matrix> bases_;
};

inline TrialResult kss_trial(const Matrix& y, int k, const std::vector<int>& ranks,
                             const Labels& init, const TrialOptions& topt, Rng& rng) {
  PcaStep step(k, ranks);
  return run_trial(y, k, init, step, topt, rng);
}

struct EkssOptions {
  EnsembleOptions ensemble{};
  std::vector<int> ranks{3};
};

template <class StepFactory>
EnsembleResult ekss_ensemble(const Matrix& y, const EkssOptions& opt, std::uint64_t seed,
                             StepFactory&& make_step) {
  return run_ensemble(y, opt.ensemble, seed, std::forward<StepFactory>(make_step));
}

inline EnsembleResult ekss_ensemble(const Matrix& y, const EkssOptions& opt, std::uint64_t seed) {
  return ekss_ensemble(y, opt, seed, [&] { return PcaStep(opt.ensemble.clusters, opt.ranks); });
}

/// Columns scaled to unit norm; zero columns are left as zero.
inline Matrix normalize_columns(const Matrix& y) {
  Matrix out = y;
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    const double n = y.col(j).norm();
    if (n > 0.0) out.col(j) /= n;
  }
  return out;
}

/// TSC affinity exp(-2 arccos |<y_i, y_j>|) on unit-normalized columns, zero
/// diagonal.
inline Matrix tsc_affinity(const Matrix& y) {
  const Matrix x = normalize_columns(y);
  Matrix z = (x.transpose() * x).cwiseAbs();
  for (Eigen::Index j = 0; j < z.cols(); ++j)
    for (Eigen::Index i = 0; i < z.rows(); ++i)
      z(i, j) = i == j ? 0.0 : std::exp(-2.0 * std::acos(std::min(1.0, z(i, j))));
  return z;
}

inline Labels tsc_cluster(const Matrix& y, int k, int q, Rng& rng, const KMeansOptions& km = {}) {
  require(q >= 1, "tsc_cluster: q must be >= 1");
  const Matrix z = threshold_top_q_rows(tsc_affinity(y), std::min<int>(q, y.cols()));
  return spectral_cluster(0.5 * (z + z.transpose()), k, rng, km);
}

/// K-means on the raw sample columns.
inline Labels kmeans_baseline(const Matrix& y, int k, Rng& rng, const KMeansOptions& km = {}) {
  return kmeans(y.transpose(), k, rng, km).labels;
}

struct OracleResult {
  Labels labels;
  std::vector<Matrix> bases;
};

/// Fits each true cluster by PCA on its low-noise samples, then assigns every
/// sample to its nearest fitted subspace.
inline OracleResult noisy_oracle(const Matrix& y, const Labels& truth,
                                 const std::vector<bool>& low_noise, int k,
                                 const std::vector<int>& ranks) {
  require(static_cast<Eigen::Index>(truth.size()) == y.cols() &&
              static_cast<Eigen::Index>(low_noise.size()) == y.cols(),
          "noisy_oracle: length mismatch");
  check_labels(truth, k);
  const auto r = expand_ranks(ranks, k);
  OracleResult out;
  for (int c = 0; c < k; ++c) {
    std::vector<int> idx;
    for (std::size_t i = 0; i < truth.size(); ++i)
      if (truth[i] == c && low_noise[i]) idx.push_back(static_cast<int>(i));
    if (idx.empty())
      throw DataError("noisy_oracle: cluster " + std::to_string(c + 1) + " has no low-noise samples");
    const Matrix yk = select_columns(y, idx);
    out.bases.push_back(pca_subspace_step(yk, std::min<int>(r[c], static_cast<int>(std::min(yk.rows(), yk.cols())))));
  }
  out.labels = assign_clusters(y, out.bases);
  return out;
}

}  // namespace hetsub
