#pragma once

// Union-of-subspaces data with two noise groups per cluster:
//   y_i = U_{c_i} z_i + eps_i,  z_i ~ N(0, coef_std^2 I_d),  eps_i ~ N(0, nu_i I_D).

#include "hetsub/core.hpp"

#include <cmath>
#include <numeric>

namespace hetsub {

struct SynthConfig {
  int ambient_dim = 100;  ///< D
  int clusters = 2;       ///< K
  int subspace_dim = 3;   ///< d
  int n_low = 6;          ///< N1, samples per cluster with variance nu_low
  int n_high = 6;         ///< N2, samples per cluster with variance nu_high
  double nu_low = 0.1;    ///< nu1
  double nu_high = 0.1;   ///< nu2
  double coef_std = 1.0;  ///< standard deviation of the subspace coefficients
  std::uint64_t seed = 0;

  int samples() const { return clusters * (n_low + n_high); }

  void validate() const {
    if (ambient_dim < 1 || subspace_dim < 1 || subspace_dim > ambient_dim)
      throw ConfigError("synth: need D >= d >= 1");
    if (clusters < 1) throw ConfigError("synth: need K >= 1");
    if (n_low < 0 || n_high < 0 || n_low + n_high < 1)
      throw ConfigError("synth: need at least one sample per cluster");
    if (nu_low < 0.0 || nu_high < 0.0) throw ConfigError("synth: noise variances must be >= 0");
    if (!(coef_std > 0.0)) throw ConfigError("synth: coef_std must be positive");
  }

  /// True when each cluster has fewer samples than its dimension.
  bool underdetermined() const { return n_low + n_high < subspace_dim; }
};

/// Coefficient scale for the D=100, d=3, nu1=0.1 landscape; puts the noisy
/// oracle near 27% error at nu2/nu1 = 300, N2/N1 = 50.
inline constexpr double kLandscapeCoefStd = 6.5;

/// The two-group landscape design: K=2, D=100, d=3, N1=6, nu1=0.1, varied
/// nu2/nu1 and N2/N1.
inline SynthConfig landscape_config(double nu_ratio, double n_ratio, std::uint64_t seed = 0) {
  SynthConfig c;
  c.n_high = static_cast<int>(std::lround(n_ratio * c.n_low));
  c.nu_high = nu_ratio * c.nu_low;
  c.coef_std = kLandscapeCoefStd;
  c.seed = seed;
  return c;
}

struct SynthDataset {
  Matrix y;                      ///< D x N
  Labels labels;                 ///< 0-based cluster per column
  std::vector<int> noise_group;  ///< 1 = low-noise group, 2 = high-noise group
  std::vector<Matrix> bases;     ///< true orthonormal U_k
  Vector nu;                     ///< true noise variance per column
  Matrix clean;                  ///< noiseless x_i

  std::vector<bool> low_noise_mask() const {
    std::vector<bool> m(noise_group.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = noise_group[i] == 1;
    return m;
  }
};

inline SynthDataset gen_uos_dataset(const SynthConfig& cfg, Rng& rng) {
  cfg.validate();
  const int per_cluster = cfg.n_low + cfg.n_high;
  const int n = cfg.samples();
  SynthDataset ds;
  ds.y.resize(cfg.ambient_dim, n);
  ds.clean.resize(cfg.ambient_dim, n);
  ds.labels.resize(static_cast<std::size_t>(n));
  ds.noise_group.resize(static_cast<std::size_t>(n));
  ds.nu.resize(n);

  int col = 0;
  for (int k = 0; k < cfg.clusters; ++k) {
    ds.bases.push_back(random_subspace(cfg.ambient_dim, cfg.subspace_dim, rng));
    const Matrix z = gaussian_matrix(cfg.subspace_dim, per_cluster, rng, cfg.coef_std);
    const Matrix noise = gaussian_matrix(cfg.ambient_dim, per_cluster, rng);
    for (int j = 0; j < per_cluster; ++j, ++col) {
      const bool low = j < cfg.n_low;
      const double nu = low ? cfg.nu_low : cfg.nu_high;
      ds.clean.col(col) = ds.bases[k] * z.col(j);
      ds.y.col(col) = ds.clean.col(col) + std::sqrt(nu) * noise.col(j);
      ds.labels[col] = k;
      ds.noise_group[col] = low ? 1 : 2;
      ds.nu(col) = nu;
    }
  }

  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  SynthDataset out;
  out.y = select_columns(ds.y, perm);
  out.clean = select_columns(ds.clean, perm);
  out.labels.resize(perm.size());
  out.noise_group.resize(perm.size());
  out.nu.resize(n);
  for (int i = 0; i < n; ++i) {
    out.labels[i] = ds.labels[perm[i]];
    out.noise_group[i] = ds.noise_group[perm[i]];
    out.nu(i) = ds.nu(perm[i]);
  }
  out.bases = std::move(ds.bases);
  return out;
}

inline SynthDataset gen_uos_dataset(const SynthConfig& cfg) {
  Rng rng = make_rng(cfg.seed);
  return gen_uos_dataset(cfg, rng);
}

}  // namespace hetsub
