#include "hetsub/alpcahus.hpp"
#include "hetsub/baselines.hpp"
#include "hetsub/metrics.hpp"
#include "hetsub/synth.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace hetsub;

namespace {

bool nonincreasing(const TrialResult& t, double tol = 1e-9) {
  for (std::size_t i = 1; i < t.cost_trace.size(); ++i) {
    if (std::find(t.reseed_points.begin(), t.reseed_points.end(), i) != t.reseed_points.end()) continue;
    if (t.cost_trace[i] > t.cost_trace[i - 1] + tol * std::max(1.0, std::abs(t.cost_trace[i - 1]))) return false;
  }
  return true;
}

SynthDataset small_uos(std::uint64_t seed, double nu_ratio = 10.0) {
  SynthConfig c = landscape_config(nu_ratio, 2.0, seed);
  c.ambient_dim = 30;
  return gen_uos_dataset(c);
}

// Returns fixed bases regardless of the data.
struct FixedStep {
  std::vector<Matrix> bases;
  double start(const Matrix&, const Labels&) { return 0.0; }
  std::vector<Matrix> fit(const Matrix&, const Labels&, std::vector<double>& trace) {
    trace.push_back(0.0);
    return bases;
  }
  double cost_after_assign(const Matrix&, const Labels&) { return 0.0; }
  void set_ranks(const Matrix&, const Labels&, const std::vector<int>&) {}
  std::vector<int> ranks() const { return std::vector<int>(bases.size(), 1); }
};

}  // namespace

TEST(TotalCost, SingleClusterEqualsCostFk) {
  Rng rng = make_rng(1);
  const Matrix y = gaussian_matrix(6, 9, rng);
  SubspaceModel m;
  ClusterModel c;
  c.factors = svd_init(y, 2);
  c.nu = Vector::Constant(9, 0.7);
  m.clusters.push_back(c);
  EXPECT_DOUBLE_EQ(total_cost(y, m, Labels(9, 0)), cost_fk(y, c.factors, c.nu));
}

TEST(TotalCost, ExactFitUnitNoiseIsZero) {
  Rng rng = make_rng(2);
  const Matrix l1 = gaussian_matrix(5, 1, rng), l2 = gaussian_matrix(5, 1, rng);
  const Matrix r1 = gaussian_matrix(3, 1, rng), r2 = gaussian_matrix(4, 1, rng);
  Matrix y(5, 7);
  y << l1 * r1.transpose(), l2 * r2.transpose();
  SubspaceModel m;
  m.clusters.push_back({{l1, r1}, Vector::Ones(3), {}, {}});
  m.clusters.push_back({{l2, r2}, Vector::Ones(4), {}, {}});
  EXPECT_NEAR(total_cost(y, m, {0, 0, 0, 1, 1, 1, 1}), 0.0, 1e-12);
}

TEST(TotalCost, MatchesScalarOracle) {
  Rng rng = make_rng(3);
  const Matrix y = gaussian_matrix(4, 6, rng);
  const Labels labels{1, 0, 1, 1, 0, 1};
  SubspaceModel m;
  for (int k = 0; k < 2; ++k) {
    const int n = k == 0 ? 2 : 4;
    ClusterModel c;
    c.factors = {gaussian_matrix(4, 1, rng), gaussian_matrix(n, 1, rng)};
    c.nu = (Vector::Random(n).array() + 2.0).matrix();
    m.clusters.push_back(c);
  }
  double oracle = 0.0;
  std::vector<int> pos{0, 0};
  for (int i = 0; i < 6; ++i) {
    const auto& c = m.clusters[labels[i]];
    const int j = pos[labels[i]]++;
    double sq = 0.0;
    for (int a = 0; a < 4; ++a) {
      const double r = y(a, i) - c.factors.left(a, 0) * c.factors.right(j, 0);
      sq += r * r;
    }
    oracle += 0.5 * sq / c.nu(j) + 2.0 * std::log(c.nu(j));
  }
  EXPECT_NEAR(total_cost(y, m, labels), oracle, 1e-10);
  EXPECT_THROW(total_cost(y, m, {0, 0, 0, 0, 0, 2}), std::invalid_argument);
}

TEST(AlpcahusTrial, OrthogonalLinesAreFixedPoint) {
  Rng rng = make_rng(4);
  Matrix y = Matrix::Zero(4, 8);
  for (int i = 0; i < 4; ++i) y(0, i) = 1.0 + i;
  for (int i = 4; i < 8; ++i) y(1, i) = -1.0 - i;
  const Labels truth{0, 0, 0, 0, 1, 1, 1, 1};
  AlpcahusTrialOptions o;
  o.ranks = {1};
  const auto r = alpcahus_trial(y, 2, truth, o, {}, rng);
  EXPECT_EQ(r.trial.labels, truth);
  EXPECT_TRUE(r.trial.converged);
  EXPECT_EQ(r.trial.rounds, 1);
}

TEST(AlpcahusTrial, SingleClusterReducesToLrAlpcah) {
  Rng g = make_rng(5);
  const Matrix y = test::well_conditioned(10, 15, 2, g) + test::heteroscedastic_noise(10, 15, g);
  AlpcahusTrialOptions o;
  o.ranks = {2};
  Rng rng = make_rng(6);
  const auto r = alpcahus_trial(y, 1, Labels(15, 0), o, {}, rng);
  LrAlpcahOptions lr;
  lr.rank = 2;
  const auto ref = lr_alpcah_solve(y, lr);
  ASSERT_GE(r.trial.cost_trace.size(), ref.cost_trace.size());
  for (std::size_t i = 0; i < ref.cost_trace.size(); ++i) EXPECT_EQ(r.trial.cost_trace[i], ref.cost_trace[i]);
  EXPECT_EQ(r.model.clusters[0].factors.left, ref.factors.left);
  EXPECT_EQ(r.nu, ref.nu);
  EXPECT_TRUE(r.trial.converged);
}

TEST(AlpcahusTrial, CostNonincreasingAndTerminates) {
  for (int s = 0; s < 30; ++s) {
    const auto ds = small_uos(static_cast<std::uint64_t>(s));
    Rng rng = make_rng(static_cast<std::uint64_t>(s));
    AlpcahusTrialOptions o;
    TrialOptions t;
    t.max_rounds = 50;
    const auto r = alpcahus_trial(ds.y, 2, random_init(static_cast<int>(ds.y.cols()), 2, rng), o, t, rng);
    EXPECT_TRUE(nonincreasing(r.trial)) << "seed " << s;
    EXPECT_TRUE(r.trial.converged);
    EXPECT_LE(r.trial.rounds, 50);
  }
}

TEST(AlpcahusTrial, NoiseFloorHolds) {
  Rng rng = make_rng(7);
  Matrix y = random_subspace(12, 2, rng) * gaussian_matrix(2, 20, rng);
  y.rightCols(10) += 0.1 * gaussian_matrix(12, 10, rng);
  AlpcahusTrialOptions o;
  o.ranks = {2};
  o.alpha = 1e-3;
  const auto r = alpcahus_trial(y, 2, random_init(20, 2, rng), o, {}, rng);
  for (Eigen::Index i = 0; i < r.nu.size(); ++i) EXPECT_GE(r.nu(i), o.alpha);
  for (const auto& c : r.model.clusters)
    for (Eigen::Index i = 0; i < c.nu.size(); ++i) EXPECT_GE(c.nu(i), o.alpha);
}

TEST(AlpcahusTrial, ShrinkingRanksNeverGrow) {
  for (int s = 0; s < 10; ++s) {
    const auto ds = small_uos(static_cast<std::uint64_t>(s));
    Rng rng = make_rng(static_cast<std::uint64_t>(s));
    AlpcahusTrialOptions o;
    o.ranks = {8};
    TrialOptions t;
    t.max_rounds = 20;
    t.shrink = ShrinkOptions{};
    const auto r = alpcahus_trial(ds.y, 2, random_subspace_init(ds.y, 2, {8}, rng), o, t, rng);
    for (int k : r.trial.ranks) EXPECT_LE(k, 8);
    EXPECT_TRUE(nonincreasing(r.trial));
  }
}

TEST(AlpcahusTrial, BasesAreOrthonormal) {
  const auto ds = small_uos(8);
  Rng rng = make_rng(8);
  const auto r = alpcahus_trial(ds.y, 2, random_init(static_cast<int>(ds.y.cols()), 2, rng), {}, {}, rng);
  for (const auto& c : r.model.clusters) {
    const Matrix g = c.basis.transpose() * c.basis;
    EXPECT_TRUE(g.isApprox(Matrix::Identity(g.rows(), g.cols()), 1e-10));
  }
}

TEST(AlpcahusTrial, TipsBeatsRandomMedian) {
  std::vector<double> random_err;
  double tips_mean = 0.0;
  for (int s = 0; s < 20; ++s) {
    const auto ds = gen_uos_dataset(landscape_config(10.0, 1.0, static_cast<std::uint64_t>(s)));
    Rng a = make_rng(s), b = make_rng(s);
    TrialOptions t;
    t.max_rounds = 50;
    const auto tips = alpcahus_trial(ds.y, 2, tips_init(ds.y, 2, 3, a), {}, t, a);
    const auto rnd = alpcahus_trial(ds.y, 2, random_init(static_cast<int>(ds.y.cols()), 2, b), {}, t, b);
    EXPECT_TRUE(nonincreasing(tips.trial));
    tips_mean += clustering_error(tips.trial.labels, ds.labels, 2) / 20;
    random_err.push_back(clustering_error(rnd.trial.labels, ds.labels, 2));
  }
  std::sort(random_err.begin(), random_err.end());
  EXPECT_LT(tips_mean, 0.5 * (random_err[9] + random_err[10]));
}

TEST(AlpcahusEnsemble, SingleTipsRunEqualsTrial) {
  const auto ds = small_uos(9, 1.0);
  AlpcahusOptions o;
  o.ensemble.init = InitMethod::tips;
  o.ensemble.trial.max_rounds = 50;
  const auto e = alpcahus_ensemble(ds.y, o, 42);
  Rng rng = make_rng(child_seed(42, 0));
  const Labels init = tips_init(ds.y, 2, 3, rng);
  const auto t = alpcahus_trial(ds.y, 2, init, o.trial, o.ensemble.trial, rng);
  EXPECT_EQ(e.labels, t.trial.labels);
  EXPECT_EQ(e.trials[0].cost_trace, t.trial.cost_trace);
}

TEST(AlpcahusEnsemble, DeterministicGivenSeed) {
  const auto ds = small_uos(10);
  AlpcahusOptions o;
  o.ensemble.base_clusterings = 6;
  const auto a = alpcahus_ensemble(ds.y, o, 7);
  const auto b = alpcahus_ensemble(ds.y, o, 7);
  EXPECT_EQ(a.labels, b.labels);
  o.ensemble.jobs = 3;
  EXPECT_EQ(alpcahus_ensemble(ds.y, o, 7).labels, a.labels);
}

TEST(AlpcahusEnsemble, PermutationEquivariant) {
  for (int s = 0; s < 5; ++s) {
    const auto ds = small_uos(static_cast<std::uint64_t>(20 + s), 1.0);
    const int n = static_cast<int>(ds.y.cols());
    Rng g = make_rng(static_cast<std::uint64_t>(s));
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), g);
    // Random-subspace initialization does not depend on column order.
    AlpcahusOptions o;
    o.ensemble.base_clusterings = 4;
    // Top-q ties break by column index, so keep every neighbor.
    o.ensemble.q = n;
    o.ensemble.init = InitMethod::random;
    const auto base = alpcahus_ensemble(ds.y, o, 99);
    const auto perm_run = alpcahus_ensemble(select_columns(ds.y, perm), o, 99);
    auto unpermute = [&](const Labels& l) {
      Labels back(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) back[perm[i]] = l[i];
      return back;
    };
    for (std::size_t b = 0; b < base.trials.size(); ++b)
      EXPECT_EQ(unpermute(perm_run.trials[b].labels), base.trials[b].labels) << "seed " << s << " trial " << b;
    EXPECT_EQ(clustering_error(unpermute(perm_run.labels), base.labels, 2), 0.0) << "seed " << s;
  }
}

TEST(AlpcahusEnsemble, AgreeingTrialsGiveThatLabeling) {
  Rng rng = make_rng(11);
  const Matrix y = gaussian_matrix(6, 12, rng);
  const Matrix u0 = random_subspace(6, 1, rng), u1 = random_subspace(6, 1, rng);
  const Labels target = assign_clusters(y, {u0, u1});
  EnsembleOptions e;
  e.base_clusterings = 5;
  e.q = 4;
  e.trial.max_rounds = 1;
  const auto r = run_ensemble(y, e, 3, [&] { return FixedStep{{u0, u1}}; });
  for (const auto& t : r.trials) EXPECT_EQ(t.labels, target);
  EXPECT_EQ(clustering_error(r.labels, target, 2), 0.0);
}

TEST(AlpcahusEnsemble, SharesPlumbingWithEkss) {
  Rng rng = make_rng(12);
  const Matrix y = gaussian_matrix(6, 14, rng);
  const std::vector<Matrix> bases{random_subspace(6, 2, rng), random_subspace(6, 2, rng)};
  AlpcahusOptions a;
  a.ensemble.base_clusterings = 4;
  EkssOptions k;
  k.ensemble = a.ensemble;
  const auto ra = alpcahus_ensemble(y, a, 5, [&] { return FixedStep{bases}; });
  const auto rk = ekss_ensemble(y, k, 5, [&] { return FixedStep{bases}; });
  EXPECT_EQ(ra.labels, rk.labels);
}

TEST(AlpcahusOptions, DefaultRounds) {
  EXPECT_EQ(default_rounds(1), 50);
  EXPECT_EQ(default_rounds(32), 3);
  EXPECT_EQ(expand_ranks({3}, 2), (std::vector<int>{3, 3}));
  EXPECT_THROW(expand_ranks({3, 4}, 3), std::invalid_argument);
}
