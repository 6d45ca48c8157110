#pragma once

// Single-subspace heteroscedastic PCA by alternating minimization of
//
//   f(L, R, Pi; Y) = 1/2 ||(Y - L R') Pi^{-1/2}||_F^2 + D/2 log|Pi|,
//
// with Pi = diag(nu) constrained to nu_i >= alpha. Each sub-step is an exact
// block minimizer, so the cost never increases.

#include "hetsub/core.hpp"
#include "hetsub/linalg.hpp"

#include <cmath>
#include <optional>

namespace hetsub {

/// Low-rank factorization Y ~ L R'. L is D x r, R is n x r.
struct FactorPair {
  Matrix left;
  Matrix right;

  Eigen::Index rank() const { return left.cols(); }
  Matrix product() const { return left * right.transpose(); }
};

/// How the L update weights samples.
enum class Weighting {
  inverse,  ///< Pi^{-1}: exact minimizer of f over L (default).
  literal,  ///< Pi itself as the weight.
};

inline constexpr double kDefaultAlpha = 1e-6;
inline constexpr int kDefaultLrIterations = 5;

/// 1/2 sum_i ||y_i - L r_i||^2 / nu_i + D/2 sum_i log nu_i.
inline double cost_fk(const Matrix& y, const FactorPair& f, const Vector& nu) {
  require(f.left.rows() == y.rows() && f.right.rows() == y.cols() &&
              nu.size() == y.cols() && f.left.cols() == f.right.cols(),
          "cost_fk: dimension mismatch");
  const Matrix residual = y - f.left * f.right.transpose();
  const double d = static_cast<double>(y.rows());
  double total = 0.0;
  for (Eigen::Index i = 0; i < y.cols(); ++i)
    total += 0.5 * residual.col(i).squaredNorm() / nu(i) + 0.5 * d * std::log(nu(i));
  return total;
}

/// argmin_L f(L, R, Pi): L = Y W R (R' W R)^{-1} with W = Pi^{-1} (or Pi for
/// Weighting::literal).
inline Matrix update_factor_L(const Matrix& y, const Matrix& r, const Vector& nu,
                              Weighting weighting = Weighting::inverse,
                              linalg::SolveDiagnostics* diag = nullptr) {
  require(r.rows() == y.cols() && nu.size() == y.cols(),
          "update_factor_L: dimension mismatch");
  const Vector w = weighting == Weighting::inverse ? nu.cwiseInverse() : nu;
  const Matrix wr = w.asDiagonal() * r;                 // n x r
  const Matrix normal = r.transpose() * wr;             // r x r
  const Matrix rhs = wr.transpose() * y.transpose();    // r x D
  return linalg::spd_solve(normal, rhs, diag).transpose();
}

/// argmin_R f(L, R, Pi): R = Y' L (L'L)^{-1}. Pi cancels column by column.
inline Matrix update_factor_R(const Matrix& y, const Matrix& l,
                              linalg::SolveDiagnostics* diag = nullptr) {
  require(l.rows() == y.rows(), "update_factor_R: dimension mismatch");
  const Matrix normal = l.transpose() * l;
  const Matrix rhs = l.transpose() * y;  // r x n
  return linalg::spd_solve(normal, rhs, diag).transpose();
}

/// nu_i = max(alpha, ||y_i - L r_i||^2 / D).
inline Vector update_noise(const Matrix& y, const FactorPair& f, double alpha) {
  require(alpha > 0.0, "update_noise: alpha must be positive");
  require(f.left.rows() == y.rows() && f.right.rows() == y.cols(),
          "update_noise: dimension mismatch");
  const Vector sq = (y - f.left * f.right.transpose()).colwise().squaredNorm().transpose();
  return (sq / static_cast<double>(y.rows())).cwiseMax(alpha);
}

/// Truncated-SVD split: L = U_r S_r^{1/2}, R = V_r S_r^{1/2}.
inline FactorPair svd_init(const Matrix& y, int rank) {
  require(rank >= 1 && rank <= std::min(y.rows(), y.cols()),
          "svd_init: rank must satisfy 1 <= rank <= min(D, n)");
  const auto svd = linalg::thin_svd(y);
  const Vector root = svd.s.head(rank).cwiseSqrt();
  return {svd.u.leftCols(rank) * root.asDiagonal(),
          svd.v.leftCols(rank) * root.asDiagonal()};
}

inline constexpr double kBasisRankTol = 1e-10;

/// Orthonormal basis of range(L) by column-pivoted QR. Columns whose pivot
/// falls below 1e-10 * ||L||_F are dropped, so a rank-deficient L yields a
/// thinner basis.
inline Matrix orthonormal_basis(const Matrix& l) {
  const double scale = l.norm();
  if (!(scale > 0.0)) throw DegenerateClusterError("orthonormal_basis: zero factor");
  Eigen::ColPivHouseholderQR<Matrix> qr(l);
  const auto& packed = qr.matrixQR();
  const Eigen::Index n = std::min(l.rows(), l.cols());
  Eigen::Index r = 0;
  while (r < n && std::abs(packed(r, r)) > kBasisRankTol * scale) ++r;
  const Matrix q = qr.householderQ() * Matrix::Identity(l.rows(), r);
  return q;
}

struct LrAlpcahOptions {
  int rank = 1;
  int iterations = kDefaultLrIterations;
  double alpha = kDefaultAlpha;
  Weighting weighting = Weighting::inverse;
  /// When false, Pi stays at its initial value (identity unless supplied),
  /// reducing the solver to plain alternating least squares.
  bool estimate_noise = true;
};

/// Warm start: factors plus per-sample variances.
struct LrAlpcahState {
  FactorPair factors;
  Vector nu;
};

struct LrAlpcahResult {
  FactorPair factors;
  Vector nu;
  /// Cost before the first iteration followed by the cost after each one.
  std::vector<double> cost_trace;
  int ridge_solves = 0;
};

/// One L, R, Pi sweep in place.
inline void lr_alpcah_iterate(const Matrix& y, LrAlpcahState& s,
                              const LrAlpcahOptions& opt,
                              linalg::SolveDiagnostics* diag = nullptr) {
  s.factors.left = update_factor_L(y, s.factors.right, s.nu, opt.weighting, diag);
  s.factors.right = update_factor_R(y, s.factors.left, diag);
  if (opt.estimate_noise) s.nu = update_noise(y, s.factors, opt.alpha);
}

/// Runs `opt.iterations` sweeps from `init` (or from svd_init with Pi = I).
inline LrAlpcahResult lr_alpcah_solve(const Matrix& y, const LrAlpcahOptions& opt,
                                      std::optional<LrAlpcahState> init = std::nullopt) {
  require(opt.rank >= 1 && opt.rank <= std::min(y.rows(), y.cols()),
          "lr_alpcah_solve: rank must satisfy 1 <= rank <= min(D, n)");
  require(opt.iterations >= 1, "lr_alpcah_solve: iterations must be >= 1");
  require(opt.alpha > 0.0, "lr_alpcah_solve: alpha must be positive");

  LrAlpcahState s = init ? std::move(*init)
                         : LrAlpcahState{svd_init(y, opt.rank), Vector::Ones(y.cols())};
  require(s.factors.right.rows() == y.cols() && s.nu.size() == y.cols(),
          "lr_alpcah_solve: warm start does not match data");

  linalg::SolveDiagnostics diag;
  LrAlpcahResult out;
  out.cost_trace.reserve(static_cast<std::size_t>(opt.iterations) + 1);
  out.cost_trace.push_back(cost_fk(y, s.factors, s.nu));
  for (int t = 0; t < opt.iterations; ++t) {
    lr_alpcah_iterate(y, s, opt, &diag);
    out.cost_trace.push_back(cost_fk(y, s.factors, s.nu));
  }
  out.factors = std::move(s.factors);
  out.nu = std::move(s.nu);
  out.ridge_solves = diag.ridge_solves;
  return out;
}

}  // namespace hetsub
