#pragma once

#include "hetsub/core.hpp"

#include <cmath>
#include <limits>

namespace hetsub {

/// Optimal assignment for a square cost matrix (Kuhn-Munkres with
/// potentials, O(K^3)). Returns perm with row i assigned to column perm[i].
inline std::vector<int> hungarian(const Matrix& cost) {
  require(cost.rows() == cost.cols(), "hungarian: cost must be square");
  const int n = static_cast<int>(cost.rows());
  if (n == 0) return {};
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; column 0 is a sentinel.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
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
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int j = 1; j <= n; ++j) perm[p[j] - 1] = j - 1;
  return perm;
}

inline double assignment_cost(const Matrix& cost, const std::vector<int>& perm) {
  double total = 0.0;
  for (std::size_t i = 0; i < perm.size(); ++i) total += cost(static_cast<Eigen::Index>(i), perm[i]);
  return total;
}

/// counts(p, t) = #{i : pred_i = p, truth_i = t}.
inline Eigen::MatrixXi confusion_matrix(const Labels& pred, const Labels& truth, int k) {
  require(pred.size() == truth.size(), "confusion_matrix: length mismatch");
  check_labels(pred, k);
  check_labels(truth, k);
  Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(k, k);
  for (std::size_t i = 0; i < pred.size(); ++i) ++counts(pred[i], truth[i]);
  return counts;
}

/// Predicted-label -> truth-label map maximizing agreement.
inline std::vector<int> match_labels(const Labels& pred, const Labels& truth, int k) {
  const Eigen::MatrixXi counts = confusion_matrix(pred, truth, k);
  return hungarian(-counts.cast<double>());
}

/// Percentage of samples misassigned under the best label permutation.
inline double clustering_error(const Labels& pred, const Labels& truth, int k) {
  require(!truth.empty(), "clustering_error: empty labeling");
  const Eigen::MatrixXi counts = confusion_matrix(pred, truth, k);
  const auto perm = hungarian(-counts.cast<double>());
  long matched = 0;
  for (int p = 0; p < k; ++p) matched += counts(p, perm[p]);
  return 100.0 * (1.0 - static_cast<double>(matched) / static_cast<double>(truth.size()));
}

/// ||U_hat U_hat' - U U'||_F / sqrt(2d): 0 for equal subspaces, 1 for
/// orthogonal ones. Equivalent to sqrt(mean sin^2 of principal angles).
inline double subspace_error(const Matrix& u_hat, const Matrix& u_true) {
  require(u_hat.rows() == u_true.rows() && u_hat.cols() == u_true.cols(),
          "subspace_error: dimension mismatch");
  require(u_hat.cols() >= 1, "subspace_error: empty basis");
  // ||P - Q||_F^2 = 2d - 2 ||U_hat' U||_F^2 avoids forming D x D projectors.
  const double d = static_cast<double>(u_hat.cols());
  const double overlap = (u_hat.transpose() * u_true).squaredNorm();
  return std::sqrt(std::max(0.0, 2.0 * d - 2.0 * overlap) / (2.0 * d));
}

struct IouResult {
  double mean_iou = 0.0;      ///< percent
  int excluded_classes = 0;   ///< classes absent from both labelings
};

/// Mean intersection-over-union after Hungarian label matching.
inline IouResult mean_iou(const Labels& pred, const Labels& truth, int k) {
  const auto perm = match_labels(pred, truth, k);
  Labels mapped(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) mapped[i] = perm[pred[i]];
  IouResult r;
  double total = 0.0;
  int used = 0;
  for (int c = 0; c < k; ++c) {
    long inter = 0, uni = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const bool a = mapped[i] == c, b = truth[i] == c;
      inter += a && b;
      uni += a || b;
    }
    if (uni == 0) {
      ++r.excluded_classes;
      continue;
    }
    total += static_cast<double>(inter) / static_cast<double>(uni);
    ++used;
  }
  r.mean_iou = used > 0 ? 100.0 * total / used : 0.0;
  return r;
}

}  // namespace hetsub
