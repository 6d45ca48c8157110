#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <exception>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace hetsub {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

/// Cluster assignment per sample (column). Labels are 0-based in memory;
/// label files on disk are 1-based (see io.hpp).
using Labels = std::vector<int>;

// Error taxonomy. The CLI maps these onto exit codes 2, 3 and 4.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised when a cluster's factor collapses to zero and no basis exists.
struct DegenerateClusterError : NumericalError {
  using NumericalError::NumericalError;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

/// Seed of the b-th child stream. Child streams depend only on (seed, b), so
/// ensemble trials give the same result in any execution order.
inline std::uint64_t child_seed(std::uint64_t seed, std::uint64_t b) {
  return seed ^ b;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Independent seed for item `index` of a named `stream` (data, algorithm,
/// tuning, ...) under a master seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return splitmix64(splitmix64(seed + 0x632BE59BD9B4E019ULL * (stream + 1)) + index);
}

/// Engine for a child stream. The raw seed is passed through seed_seq so that
/// neighbouring seeds (seed ^ 0, seed ^ 1, ...) start well decorrelated.
inline Rng make_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32)};
  return Rng(seq);
}

inline Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng,
                              double stddev = 1.0) {
  std::normal_distribution<double> normal(0.0, stddev);
  Matrix m(rows, cols);
  // Column-major fill order is part of the determinism contract.
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

/// Columns of `y` selected by `index`.
/// Orthonormalized standard Gaussian D x d matrix (Haar-distributed range).
inline Matrix random_subspace(int ambient_dim, int dim, Rng& rng) {
  require(dim >= 1 && dim <= ambient_dim, "random_subspace: need 1 <= d <= D");
  const Matrix g = gaussian_matrix(ambient_dim, dim, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(ambient_dim, dim);
  // Fix column signs so the basis is a function of the Gaussian draw alone.
  const Matrix r = qr.matrixQR().topRows(dim).triangularView<Eigen::Upper>();
  for (int j = 0; j < dim; ++j)
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  return q;
}

inline Matrix select_columns(const Matrix& y, const std::vector<int>& index) {
  Matrix out(y.rows(), static_cast<Eigen::Index>(index.size()));
  for (std::size_t j = 0; j < index.size(); ++j) out.col(j) = y.col(index[j]);
  return out;
}

inline std::vector<int> members_of(const Labels& labels, int k) {
  std::vector<int> idx;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == k) idx.push_back(static_cast<int>(i));
  return idx;
}

inline void check_labels(const Labels& labels, int k_count) {
  for (int c : labels)
    if (c < 0 || c >= k_count)
      throw std::invalid_argument("label " + std::to_string(c + 1) +
                                  " out of range 1.." + std::to_string(k_count));
}

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Work is split by index
/// so results written to per-index slots are independent of `jobs`.
template <class Fn>
void parallel_for(int n, int jobs, Fn&& fn) {
  if (n <= 0) return;
  jobs = std::clamp(jobs, 1, n);
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(jobs));
  for (int w = 0; w < jobs; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < n; i += jobs) fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace hetsub
