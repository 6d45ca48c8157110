#pragma once

#include "hetsub/core.hpp"
#include "hetsub/linalg.hpp"

#include <cmath>
#include <string>

namespace hetsub {

enum class RankMethod { eigengap, flippa };

inline std::string to_string(RankMethod m) {
  return m == RankMethod::eigengap ? "eigengap" : "flippa";
}

struct RankEstimate {
  int rank = 0;
  RankMethod method = RankMethod::flippa;
  /// flippa: sigma_1 never exceeded its null percentile (rank == 0).
  bool no_signal = false;
  /// flippa: no d satisfied the test and rank was set to min(D, n).
  bool saturated = false;
  Vector spectrum;    ///< eigenvalues (eigengap) or singular values (flippa), descending
  Vector thresholds;  ///< flippa percentile thresholds per index
};

/// Index (1-based) of the largest gap lambda_i - lambda_{i+1} over i < m,
/// with `spectrum` sorted descending. Gaps within 1e-12 * lambda_1 of the
/// maximum count as ties and the smallest index wins.
inline int eigengap_from_spectrum(const Vector& spectrum, Eigen::Index m) {
  m = std::min(m, spectrum.size());
  if (m < 2) return 1;
  double best = -1.0;
  for (Eigen::Index i = 0; i + 1 < m; ++i)
    best = std::max(best, std::abs(spectrum(i) - spectrum(i + 1)));
  const double tol = 1e-12 * std::max(std::abs(spectrum(0)), 1e-300);
  for (Eigen::Index i = 0; i + 1 < m; ++i)
    if (std::abs(spectrum(i) - spectrum(i + 1)) >= best - tol) return static_cast<int>(i + 1);
  return 1;
}

/// Eigengap heuristic on the sample covariance S = Y Y' / n.
inline RankEstimate eigengap_rank(const Matrix& yk) {
  require(yk.cols() >= 2, "eigengap_rank: need at least 2 samples");
  const double n = static_cast<double>(yk.cols());
  // Eigenvalues of S are sigma_i(Y)^2 / n.
  const Vector s = linalg::singular_values(yk);
  RankEstimate r;
  r.method = RankMethod::eigengap;
  r.spectrum = s.array().square() / n;
  r.rank = eigengap_from_spectrum(r.spectrum, std::min(yk.rows(), yk.cols()));
  return r;
}

/// Percentile with linear interpolation between order statistics.
inline double percentile(std::vector<double> values, double pct) {
  require(!values.empty(), "percentile: no values");
  std::sort(values.begin(), values.end());
  const double pos = pct / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

inline constexpr int kDefaultFlipTrials = 10;
inline constexpr double kDefaultFlipPercentile = 95.0;

struct FlipPaOptions {
  int trials = kDefaultFlipTrials;
  double percentile = kDefaultFlipPercentile;
};

/// Sign-flip parallel analysis: the estimate is the smallest d for which
/// sigma_{d+1}(Y) does not exceed the chosen percentile of sigma_{d+1} over
/// R copies M (.) Y with i.i.d. random signs in M.
inline RankEstimate flippa_rank(const Matrix& yk, Rng& rng, const FlipPaOptions& opt = {}) {
  require(opt.trials >= 1, "flippa_rank: need at least one trial");
  require(opt.percentile > 0.0 && opt.percentile <= 100.0,
          "flippa_rank: percentile must be in (0, 100]");
  const Eigen::Index m = std::min(yk.rows(), yk.cols());
  RankEstimate r;
  r.method = RankMethod::flippa;
  r.spectrum = linalg::singular_values(yk);
  if (m == 0) return r;

  std::vector<Vector> flipped;
  flipped.reserve(static_cast<std::size_t>(opt.trials));
  std::bernoulli_distribution coin(0.5);
  for (int t = 0; t < opt.trials; ++t) {
    Matrix f(yk.rows(), yk.cols());
    for (Eigen::Index j = 0; j < yk.cols(); ++j)
      for (Eigen::Index i = 0; i < yk.rows(); ++i) f(i, j) = coin(rng) ? yk(i, j) : -yk(i, j);
    flipped.push_back(linalg::singular_values(f));
  }

  r.thresholds.resize(m);
  std::vector<double> column(static_cast<std::size_t>(opt.trials));
  for (Eigen::Index d = 0; d < m; ++d) {
    for (int t = 0; t < opt.trials; ++t) column[t] = flipped[t](d);
    r.thresholds(d) = percentile(column, opt.percentile);
  }
  for (Eigen::Index d = 0; d < m; ++d) {
    if (r.spectrum(d) <= r.thresholds(d)) {
      r.rank = static_cast<int>(d);
      r.no_signal = d == 0;
      return r;
    }
  }
  r.rank = static_cast<int>(m);
  r.saturated = true;
  return r;
}

struct ShrinkOptions {
  RankMethod method = RankMethod::flippa;
  FlipPaOptions flippa{};
};

/// Shrink-only per-cluster rank update: d_k <- min(d_k, estimate(Y_k)).
/// Clusters with fewer than two samples keep their rank; estimates below one
/// are floored at one.
inline std::vector<int> adaptive_shrink(const Matrix& y, const Labels& labels,
                                        const std::vector<int>& ranks, Rng& rng,
                                        const ShrinkOptions& opt = {}) {
  require(static_cast<Eigen::Index>(labels.size()) == y.cols(), "adaptive_shrink: label count");
  const int k_count = static_cast<int>(ranks.size());
  check_labels(labels, k_count);
  std::vector<int> out = ranks;
  for (int k = 0; k < k_count; ++k) {
    const auto idx = members_of(labels, k);
    if (idx.size() < 2) continue;
    const Matrix yk = select_columns(y, idx);
    const RankEstimate est =
        opt.method == RankMethod::flippa ? flippa_rank(yk, rng, opt.flippa) : eigengap_rank(yk);
    out[k] = std::min(out[k], std::max(1, est.rank));
  }
  return out;
}

}  // namespace hetsub
