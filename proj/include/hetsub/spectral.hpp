#pragma once

#include "hetsub/core.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace hetsub {

/// Random-walk Laplacian I - D^{-1} W. Zero-degree rows use D_ii = 1.
inline Matrix normalized_laplacian(const Matrix& w) {
  require(w.rows() == w.cols(), "normalized_laplacian: W must be square");
  const Eigen::Index n = w.rows();
  Matrix lap = -w;
  for (Eigen::Index i = 0; i < n; ++i) {
    double deg = w.row(i).sum();
    if (!(deg > 0.0)) deg = 1.0;
    lap.row(i) /= deg;
    lap(i, i) += 1.0;
  }
  return lap;
}

/// Symmetric Laplacian I - D^{-1/2} W D^{-1/2}; similar to the random-walk
/// form, so it has the same spectrum and null-space dimension.
inline Matrix symmetric_normalized_laplacian(const Matrix& w) {
  require(w.rows() == w.cols(), "symmetric_normalized_laplacian: W must be square");
  const Eigen::Index n = w.rows();
  Vector inv_root(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double deg = w.row(i).sum();
    inv_root(i) = deg > 0.0 ? 1.0 / std::sqrt(deg) : 1.0;
  }
  Matrix lap = -(inv_root.asDiagonal() * w * inv_root.asDiagonal());
  lap.diagonal().array() += 1.0;
  return lap;
}

/// Eigenvectors of the K smallest eigenvalues of a symmetric Laplacian,
/// ascending. The input is symmetrized as (L + L')/2 first.
inline Matrix spectral_embedding(const Matrix& lap, int k) {
  require(lap.rows() == lap.cols(), "spectral_embedding: L must be square");
  require(k >= 1 && k <= lap.rows(), "spectral_embedding: need 1 <= K <= N");
  const Matrix sym = 0.5 * (lap + lap.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (eig.info() != Eigen::Success)
    throw NumericalError("spectral_embedding: eigensolver failed");
  return eig.eigenvectors().leftCols(k);
}

struct KMeansOptions {
  int restarts = 10;
  int max_iterations = 100;
};

struct KMeansResult {
  Labels labels;
  Matrix centers;  ///< K x p
  double wcss = 0.0;
};

namespace detail {

inline KMeansResult kmeans_once(const Matrix& x, int k, int max_iter, Rng& rng) {
  const Eigen::Index n = x.rows();
  Matrix centers(k, x.cols());

  // k-means++ seeding.
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  centers.row(0) = x.row(pick(rng));
  Vector nearest = (x.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = nearest.sum();
    Eigen::Index chosen = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      chosen = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        target -= nearest(i);
        if (target < 0.0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = pick(rng);
    }
    centers.row(c) = x.row(chosen);
    nearest = nearest.cwiseMin((x.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }

  Labels labels(static_cast<std::size_t>(n), -1);
  Vector dist(n);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (x.row(i) - centers.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      dist(i) = best_d;
      if (labels[i] != best) {
        labels[i] = best;
        changed = true;
      }
    }
    if (!changed && it > 0) break;

    Matrix sums = Matrix::Zero(k, x.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(labels[i]) += x.row(i);
      ++counts[labels[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        centers.row(c) = sums.row(c) / counts[c];
        continue;
      }
      // Empty cluster: reseed with the point farthest from its center.
      Eigen::Index far = 0;
      dist.maxCoeff(&far);
      centers.row(c) = x.row(far);
      dist(far) = 0.0;
      labels[far] = c;
    }
  }

  KMeansResult r;
  r.wcss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) r.wcss += (x.row(i) - centers.row(labels[i])).squaredNorm();
  r.labels = std::move(labels);
  r.centers = std::move(centers);
  return r;
}

}  // namespace detail

/// Lloyd's algorithm on the rows of `points`, best of `restarts` k-means++
/// starts by within-cluster sum of squares (first restart wins ties).
inline KMeansResult kmeans(const Matrix& points, int k, Rng& rng,
                           const KMeansOptions& opt = {}) {
  require(k >= 1 && k <= points.rows(), "kmeans: need N >= K >= 1");
  require(opt.restarts >= 1 && opt.max_iterations >= 1, "kmeans: bad options");
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(opt.restarts));
  for (auto& s : seeds) s = rng();
  KMeansResult best;
  best.wcss = std::numeric_limits<double>::infinity();
  for (int r = 0; r < opt.restarts; ++r) {
    Rng local = make_rng(seeds[r]);
    KMeansResult run = detail::kmeans_once(points, k, opt.max_iterations, local);
    if (run.wcss < best.wcss) best = std::move(run);
  }
  return best;
}

/// Spectral clustering: symmetric normalized Laplacian, K-dimensional
/// embedding, K-means on the embedding rows (not renormalized).
inline Labels spectral_cluster(const Matrix& w, int k, Rng& rng,
                               const KMeansOptions& opt = {}) {
  require(w.rows() == w.cols(), "spectral_cluster: W must be square");
  const Matrix h = spectral_embedding(symmetric_normalized_laplacian(w), k);
  return kmeans(h, k, rng, opt).labels;
}

/// Keeps the q largest-magnitude entries of each row; ties go to the lower
/// column index.
inline Matrix threshold_top_q_rows(const Matrix& a, int q) {
  require(q >= 1 && q <= a.cols(), "threshold_top_q_rows: need 1 <= q <= N");
  Matrix out = Matrix::Zero(a.rows(), a.cols());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(a.cols()));
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::partial_sort(order.begin(), order.begin() + q, order.end(),
                      [&](Eigen::Index x, Eigen::Index y) {
                        const double ax = std::abs(a(i, x));
                        const double ay = std::abs(a(i, y));
                        return ax > ay || (ax == ay && x < y);
                      });
    for (int j = 0; j < q; ++j) out(i, order[j]) = a(i, order[j]);
  }
  return out;
}

/// Column counterpart of threshold_top_q_rows.
inline Matrix threshold_top_q_cols(const Matrix& a, int q) {
  return threshold_top_q_rows(a.transpose(), q).transpose();
}

inline Matrix symmetrize_avg(const Matrix& zr, const Matrix& zc) {
  require(zr.rows() == zc.rows() && zr.cols() == zc.cols(),
          "symmetrize_avg: shape mismatch");
  return 0.5 * (zr + zc);
}

}  // namespace hetsub
