#pragma once

#include "hetsub/core.hpp"

#include <cmath>

namespace hetsub::linalg {

struct SolveDiagnostics {
  int ridge_solves = 0;
};

inline constexpr double kMaxCondition = 1e12;
inline constexpr double kRidgeScale = 1e-10;

/// Solves A X = B for a small symmetric positive (semi)definite A.
/// Falls back to A + ridge*I when the Cholesky factorization fails or the
/// eigenvalue condition number exceeds 1e12, with ridge = 1e-10 * tr(A) / n.
inline Matrix spd_solve(const Matrix& a, const Matrix& b,
                        SolveDiagnostics* diag = nullptr) {
  require(a.rows() == a.cols() && a.rows() == b.rows(),
          "spd_solve: dimension mismatch");
  const Eigen::Index n = a.rows();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues()(0);
  const double hi = eig.eigenvalues()(n - 1);
  bool ill = !(lo > 0.0) || hi / lo > kMaxCondition;

  Eigen::LLT<Matrix> llt;
  if (!ill) {
    llt.compute(a);
    ill = llt.info() != Eigen::Success;
  }
  if (ill) {
    double ridge = kRidgeScale * a.trace() / static_cast<double>(n);
    if (!(ridge > 0.0)) ridge = kRidgeScale;
    llt.compute(a + ridge * Matrix::Identity(n, n));
    if (llt.info() != Eigen::Success)
      throw NumericalError("spd_solve: regularized factorization failed");
    if (diag) ++diag->ridge_solves;
  }
  return llt.solve(b);
}

struct ThinSvd {
  Matrix u;
  Vector s;
  Matrix v;
};

/// Thin SVD with singular values in descending order.
inline ThinSvd thin_svd(const Matrix& y) {
  Eigen::BDCSVD<Matrix> svd(y, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericalError("SVD failed");
  return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

inline Vector singular_values(const Matrix& y) {
  Eigen::BDCSVD<Matrix> svd(y);
  if (svd.info() != Eigen::Success) throw NumericalError("SVD failed");
  return svd.singularValues();
}

/// Cosines of the principal angles between range(a) and range(b), for
/// orthonormal a and b; descending.
inline Vector principal_cosines(const Matrix& a, const Matrix& b) {
  Vector c = singular_values(a.transpose() * b);
  return c.cwiseMin(1.0);
}

/// Largest principal angle (radians) between range(a) and range(b), for
/// orthonormal a and b of equal width. Computed from the sines, which stay
/// accurate for tiny angles where the cosines round to one.
inline double max_principal_angle(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          "max_principal_angle: dimension mismatch");
  if (b.cols() == 0) return 0.0;
  const Matrix off = b - a * (a.transpose() * b);
  const Vector s = singular_values(off);
  return std::asin(std::min(1.0, s(0)));
}

/// Per-column squared residual ||y_i - U U' y_i||^2 for orthonormal U.
inline Vector projection_residuals(const Matrix& y, const Matrix& basis) {
  if (basis.cols() == 0) return y.colwise().squaredNorm().transpose();
  const Matrix r = y - basis * (basis.transpose() * y);
  return r.colwise().squaredNorm().transpose();
}

}  // namespace hetsub::linalg
