#include "hetsub/rank.hpp"
#include "hetsub/synth.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

using namespace hetsub;

namespace {

// D x n matrix with prescribed singular values on random orthonormal frames.
Matrix with_singular_values(int d, int n, const std::vector<double>& s, Rng& rng) {
  const Matrix u = random_subspace(d, static_cast<int>(s.size()), rng);
  const Matrix v = random_subspace(n, static_cast<int>(s.size()), rng);
  Vector sv(static_cast<Eigen::Index>(s.size()));
  for (std::size_t i = 0; i < s.size(); ++i) sv(static_cast<Eigen::Index>(i)) = s[i];
  return u * sv.asDiagonal() * v.transpose();
}

}  // namespace

TEST(Eigengap, DominantGap) {
  Vector s(5);
  s << 10, 10, 1, 0.1, 0.05;
  EXPECT_EQ(eigengap_from_spectrum(s, 5), 2);
}

TEST(Eigengap, EqualGapsPickFirst) {
  Vector s(5);
  s << 5, 4, 3, 2, 1;
  EXPECT_EQ(eigengap_from_spectrum(s, 5), 1);
}

TEST(Eigengap, CovarianceSpectrumFromData) {
  Rng rng = make_rng(1);
  // Sample covariance eigenvalues are sigma^2 / n; sigma = sqrt(n * lambda).
  const int n = 20;
  const Matrix y = with_singular_values(8, n, {std::sqrt(n * 10.0), std::sqrt(n * 10.0), std::sqrt(n * 1.0)}, rng);
  const auto r = eigengap_rank(y);
  EXPECT_EQ(r.rank, 2);
  EXPECT_NEAR(r.spectrum(0), 10.0, 1e-9);
  EXPECT_NEAR(r.spectrum(2), 1.0, 1e-9);
}

namespace {

// Rank-3 matrix with singular values drawn from [9, 11].
Matrix rank_three(int d, int n, Rng& rng) {
  std::uniform_real_distribution<double> sv(9.0, 11.0);
  Vector s(3);
  for (int i = 0; i < 3; ++i) s(i) = sv(rng);
  return random_subspace(d, 3, rng) * s.asDiagonal() * random_subspace(n, 3, rng).transpose();
}

}  // namespace

TEST(Eigengap, LowRankPlusSmallNoise) {
  Rng rng = make_rng(2);
  int hits = 0;
  for (int s = 0; s < 100; ++s) {
    const Matrix signal = rank_three(30, 40, rng);
    Matrix noise = gaussian_matrix(30, 40, rng);
    noise *= 0.1 * signal.norm() / noise.norm();
    const Matrix y = signal + noise;
    hits += eigengap_rank(y).rank == 3;
  }
  EXPECT_GE(hits, 95);
}

TEST(Eigengap, ScaleInvariant) {
  Rng rng = make_rng(3);
  for (int t = 0; t < 50; ++t) {
    const Matrix y = gaussian_matrix(10, 3, rng) * gaussian_matrix(3, 15, rng) + 0.3 * gaussian_matrix(10, 15, rng);
    const int base = eigengap_rank(y).rank;
    EXPECT_EQ(eigengap_rank(-3.7 * y).rank, base);
    EXPECT_EQ(eigengap_rank(1e-3 * y).rank, base);
  }
}

TEST(Eigengap, NeedsTwoSamples) {
  EXPECT_THROW(eigengap_rank(Matrix::Ones(3, 1)), std::invalid_argument);
}

TEST(Percentile, LinearInterpolation) {
  EXPECT_DOUBLE_EQ(percentile({4, 1, 3, 2}, 100.0), 4.0);
  EXPECT_DOUBLE_EQ(percentile({4, 1, 3, 2}, 50.0), 2.5);
  EXPECT_DOUBLE_EQ(percentile({1, 2, 3, 4, 5}, 95.0), 4.8);
}

TEST(FlipPa, PureNoiseHasNoSignal) {
  Rng rng = make_rng(4);
  int zero = 0;
  for (int s = 0; s < 100; ++s) {
    const auto r = flippa_rank(gaussian_matrix(30, 40, rng), rng);
    zero += r.rank == 0 && r.no_signal;
  }
  EXPECT_GE(zero, 90);
}

TEST(FlipPa, NoiselessLowRank) {
  Rng rng = make_rng(5);
  for (int s = 0; s < 100; ++s) {
    const Matrix y = rank_three(20, 25, rng);
    for (double pct : {50.0, 95.0})
      ASSERT_EQ(flippa_rank(y, rng, {10, pct}).rank, 3) << "seed " << s;
  }
}

TEST(FlipPa, HeteroscedasticRankSix) {
  std::vector<int> est;
  for (int s = 0; s < 100; ++s) {
    SynthConfig c = landscape_config(100.0, 1.0, static_cast<std::uint64_t>(s));
    c.clusters = 1;
    c.subspace_dim = 6;
    c.n_low = 30;
    c.n_high = 30;
    const auto ds = gen_uos_dataset(c);
    Rng rng = make_rng(1000 + s);
    est.push_back(flippa_rank(ds.y, rng).rank);
  }
  std::nth_element(est.begin(), est.begin() + 50, est.end());
  EXPECT_EQ(est[50], 6);
}

TEST(FlipPa, FlipInvariantSpectrumIsNoSignal) {
  Rng rng = make_rng(6);
  // Sign flips of a diagonal matrix keep its singular values, so sigma_1 ties
  // its own threshold.
  const auto r = flippa_rank(Matrix::Identity(4, 4), rng, {5, 100.0});
  EXPECT_EQ(r.rank, 0);
  EXPECT_TRUE(r.no_signal);
  EXPECT_FALSE(r.saturated);
  EXPECT_EQ(r.thresholds.size(), 4);
}

TEST(FlipPa, ColumnPermutationWithMatchedSigns) {
  Rng g = make_rng(7);
  const Matrix y = random_subspace(15, 2, g) * gaussian_matrix(2, 12, g) + 0.2 * gaussian_matrix(15, 12, g);
  // Flipped copies of Y and of its column permutation have the same
  // distribution, so estimates agree across independent seeds.
  std::vector<int> perm(12);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), g);
  const Matrix yp = select_columns(y, perm);
  EXPECT_TRUE(linalg::singular_values(yp).isApprox(linalg::singular_values(y), 1e-12));
  int agree = 0;
  for (int s = 0; s < 50; ++s) {
    Rng a = make_rng(s), b = make_rng(s + 1000);
    agree += flippa_rank(y, a).rank == flippa_rank(yp, b).rank;
  }
  EXPECT_GE(agree, 45);
}

TEST(FlipPa, RejectsBadOptions) {
  Rng rng = make_rng(8);
  EXPECT_THROW(flippa_rank(Matrix::Ones(3, 3), rng, {0, 95.0}), std::invalid_argument);
  EXPECT_THROW(flippa_rank(Matrix::Ones(3, 3), rng, {5, 0.0}), std::invalid_argument);
}

TEST(AdaptiveShrink, NeverGrows) {
  Rng rng = make_rng(9);
  const Matrix y = random_subspace(20, 5, rng) * gaussian_matrix(5, 30, rng);
  const Labels labels(30, 0);
  EXPECT_EQ(adaptive_shrink(y, labels, {2}, rng), std::vector<int>{2});
}

TEST(AdaptiveShrink, SingleClusterEqualsFlipPa) {
  Rng g = make_rng(10);
  const Matrix y = random_subspace(20, 4, g) * gaussian_matrix(4, 30, g) + 0.1 * gaussian_matrix(20, 30, g);
  Rng a = make_rng(11), b = make_rng(11);
  const int est = flippa_rank(y, a).rank;
  EXPECT_EQ(adaptive_shrink(y, Labels(30, 0), {30}, b), std::vector<int>{std::max(1, est)});
}

TEST(AdaptiveShrink, TinyClusterKeepsRank) {
  Rng rng = make_rng(12);
  const Matrix y = gaussian_matrix(10, 5, rng);
  const Labels labels{0, 0, 0, 0, 1};
  const auto r = adaptive_shrink(y, labels, {4, 7}, rng);
  EXPECT_EQ(r[1], 7);
}

TEST(AdaptiveShrink, RecoversTwoClusterRanks) {
  int hits = 0;
  for (int s = 0; s < 100; ++s) {
    Rng rng = make_rng(static_cast<std::uint64_t>(s));
    const Matrix a = random_subspace(50, 3, rng) * gaussian_matrix(3, 40, rng, 3.0);
    const Matrix b = random_subspace(50, 5, rng) * gaussian_matrix(5, 40, rng, 3.0);
    Matrix y(50, 80);
    y << a, b;
    y += 0.1 * gaussian_matrix(50, 80, rng);
    Labels labels(80, 0);
    std::fill(labels.begin() + 40, labels.end(), 1);
    std::vector<int> r{8, 8};
    for (int round = 0; round < 2; ++round) r = adaptive_shrink(y, labels, r, rng);
    hits += std::abs(r[0] - 3) <= 1 && std::abs(r[1] - 5) <= 1;
  }
  EXPECT_GE(hits, 80);
}
