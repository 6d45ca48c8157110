#pragma once

// Experiment harness: runs one configured algorithm over repeated synthetic
// (or loaded) datasets, scores it, and renders plot-ready tables.

#include "hetsub/alpcahus.hpp"
#include "hetsub/baselines.hpp"
#include "hetsub/config.hpp"
#include "hetsub/io.hpp"
#include "hetsub/metrics.hpp"
#include "hetsub/synth.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

namespace hetsub {

// Seed streams under the master seed.
inline constexpr std::uint64_t kDataStream = 1;
inline constexpr std::uint64_t kAlgorithmStream = 2;
inline constexpr std::uint64_t kTuneDataStream = 3;
inline constexpr std::uint64_t kTuneAlgorithmStream = 4;

struct AlgorithmOutput {
  Labels labels;
  std::vector<Matrix> bases;  ///< per predicted cluster; empty for tsc/kmeans
  std::vector<double> cost_trace;
  std::vector<int> ranks;
  int rounds = 0;
  bool converged = false;
  int repairs = 0;
};

namespace experiment_detail {

inline std::optional<ShrinkOptions> shrink_options(const ExperimentConfig& c) {
  if (!c.auto_rank) return std::nullopt;
  ShrinkOptions s;
  s.method = c.rank_method;
  s.flippa = {c.flippa_trials, c.flippa_percentile};
  return s;
}

inline void copy_trial(const TrialResult& t, AlgorithmOutput& out) {
  out.labels = t.labels;
  out.bases = t.bases;
  out.cost_trace = t.cost_trace;
  out.ranks = t.ranks;
  out.rounds = t.rounds;
  out.converged = t.converged;
  out.repairs = t.repairs;
}

/// Bases for a consensus labeling, refit per final cluster.
inline std::vector<Matrix> post_fit(const Matrix& y, const Labels& labels, const ExperimentConfig& c,
                                    std::vector<int> ranks, Rng& rng) {
  ranks = expand_ranks(ranks, c.clusters);
  if (auto sh = shrink_options(c)) ranks = adaptive_shrink(y, labels, ranks, rng, *sh);
  std::vector<Matrix> bases;
  for (int k = 0; k < c.clusters; ++k) {
    const auto idx = members_of(labels, k);
    if (idx.empty()) {
      bases.push_back(Matrix::Zero(y.rows(), 0));
      continue;
    }
    const Matrix yk = select_columns(y, idx);
    const int r = std::min<int>(ranks[k], static_cast<int>(std::min(yk.rows(), yk.cols())));
    if (c.algorithm == Algorithm::alpcahus) {
      LrAlpcahOptions lr;
      lr.rank = r;
      lr.iterations = c.lr_iterations;
      lr.alpha = c.alpha_noise;
      lr.weighting = c.weighting;
      bases.push_back(orthonormal_basis(lr_alpcah_solve(yk, lr).factors.left));
    } else {
      bases.push_back(pca_subspace_step(yk, r));
    }
  }
  return bases;
}

inline EnsembleOptions ensemble_options(const ExperimentConfig& c, int q) {
  EnsembleOptions ens;
  ens.clusters = c.clusters;
  ens.base_clusterings = c.algorithm == Algorithm::kss ? 1 : c.base_clusterings;
  ens.q = q;
  ens.init = c.init;
  ens.init_ranks = c.initial_ranks();
  ens.trial.max_rounds = c.resolved_rounds();
  ens.trial.shrink = shrink_options(c);
  ens.kmeans.restarts = c.kmeans_restarts;
  return ens;
}

inline AlpcahusOptions alpcahus_options(const ExperimentConfig& c, int q) {
  AlpcahusOptions opt;
  opt.ensemble = ensemble_options(c, q);
  opt.trial.ranks = c.initial_ranks();
  opt.trial.lr_iterations = c.lr_iterations;
  opt.trial.alpha = c.alpha_noise;
  opt.trial.weighting = c.weighting;
  return opt;
}

inline EkssOptions ekss_options(const ExperimentConfig& c, int q) {
  EkssOptions opt;
  opt.ensemble = ensemble_options(c, q);
  opt.ranks = c.initial_ranks();
  return opt;
}

inline bool is_ensemble(const ExperimentConfig& c) {
  return (c.algorithm == Algorithm::alpcahus || c.algorithm == Algorithm::ekss) && c.base_clusterings > 1;
}

}  // namespace experiment_detail

/// Runs the configured algorithm once. `truth` and `low_noise` are needed by
/// the oracle only.
inline AlgorithmOutput run_algorithm(const Matrix& y, const ExperimentConfig& c, int q,
                                     std::uint64_t seed, const Labels* truth = nullptr,
                                     const std::vector<bool>* low_noise = nullptr) {
  using namespace experiment_detail;
  AlgorithmOutput out;
  Rng rng = make_rng(seed);
  KMeansOptions km;
  km.restarts = c.kmeans_restarts;

  switch (c.algorithm) {
    case Algorithm::alpcahus: {
      const auto r = alpcahus_ensemble(y, alpcahus_options(c, q), seed);
      if (c.base_clusterings == 1) {
        copy_trial(r.trials.front(), out);
      } else {
        out.labels = r.labels;
        out.bases = post_fit(y, out.labels, c, c.initial_ranks(), rng);
      }
      break;
    }
    case Algorithm::ekss:
    case Algorithm::kss: {
      const auto opt = ekss_options(c, q);
      const auto r = ekss_ensemble(y, opt, seed);
      if (opt.ensemble.base_clusterings == 1) {
        copy_trial(r.trials.front(), out);
      } else {
        out.labels = r.labels;
        out.bases = post_fit(y, out.labels, c, c.initial_ranks(), rng);
      }
      break;
    }
    case Algorithm::tsc:
      out.labels = tsc_cluster(y, c.clusters, q, rng, km);
      break;
    case Algorithm::kmeans:
      out.labels = kmeans_baseline(y, c.clusters, rng, km);
      break;
    case Algorithm::oracle: {
      if (!truth || !low_noise) throw ConfigError("oracle needs true labels and noise groups");
      auto r = noisy_oracle(y, *truth, *low_noise, c.clusters, c.initial_ranks());
      out.labels = std::move(r.labels);
      out.bases = std::move(r.bases);
      break;
    }
  }
  return out;
}

/// Mean subspace_error over true clusters after label matching; NaN when no
/// matched pair has equal dimensions.
inline double matched_subspace_error(const Labels& pred, const Labels& truth, int k,
                                     const std::vector<Matrix>& bases,
                                     const std::vector<Matrix>& true_bases) {
  if (bases.size() != static_cast<std::size_t>(k) || true_bases.size() != static_cast<std::size_t>(k))
    return std::numeric_limits<double>::quiet_NaN();
  const auto perm = match_labels(pred, truth, k);
  double total = 0.0;
  int used = 0;
  for (int p = 0; p < k; ++p) {
    const Matrix& t = true_bases[perm[p]];
    if (bases[p].cols() != t.cols() || t.cols() == 0) continue;
    total += subspace_error(bases[p], t);
    ++used;
  }
  return used ? total / used : std::numeric_limits<double>::quiet_NaN();
}

struct TrialRecord {
  int index = 0;
  std::uint64_t data_seed = 0;
  std::uint64_t algorithm_seed = 0;
  AlgorithmOutput output;
  double clustering_error = std::numeric_limits<double>::quiet_NaN();
  double mean_iou = std::numeric_limits<double>::quiet_NaN();
  double subspace_error = std::numeric_limits<double>::quiet_NaN();
  double wall_ms = 0.0;
};

struct Summary {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double median = std::numeric_limits<double>::quiet_NaN();
  double std = std::numeric_limits<double>::quiet_NaN();
  double min = std::numeric_limits<double>::quiet_NaN();
  double max = std::numeric_limits<double>::quiet_NaN();
  int count = 0;
};

/// NaN entries are skipped. std is the sample standard deviation.
inline Summary summarize(const std::vector<double>& values) {
  std::vector<double> v;
  for (double x : values)
    if (!std::isnan(x)) v.push_back(x);
  Summary s;
  s.count = static_cast<int>(v.size());
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / v.size();
  s.median = v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.std = v.size() > 1 ? std::sqrt(ss / (v.size() - 1)) : 0.0;
  s.min = v.front();
  s.max = v.back();
  return s;
}

struct RunReport {
  ExperimentConfig config;
  int q_used = 0;
  std::vector<std::pair<int, double>> q_scores;  ///< tuning grid results
  std::vector<TrialRecord> trials;
  Summary clustering_error;
  Summary mean_iou;
  Summary subspace_error;
  std::size_t peak_memory_estimate = 0;  ///< bytes, from problem dimensions
  double wall_ms = 0.0;
};

/// Dataset for trial `t`: a fresh synthetic draw, or the loaded data.
struct TrialData {
  Matrix y;
  Labels truth;
  std::vector<bool> low_noise;
  std::vector<Matrix> bases;
  std::uint64_t seed = 0;
};

struct LoadedData {
  Matrix y;
  Labels truth;
  std::vector<bool> low_noise;
};

inline LoadedData load_input_data(const ExperimentConfig& c) {
  LoadedData d;
  d.y = io::load_matrix(c.matrix_path);
  if (!c.labels_path.empty()) {
    d.truth = io::load_labels(c.labels_path);
    if (static_cast<Eigen::Index>(d.truth.size()) != d.y.cols())
      throw DataError("labels file has " + std::to_string(d.truth.size()) + " entries for " +
                      std::to_string(d.y.cols()) + " samples");
    check_labels(d.truth, c.clusters);
  }
  if (!c.noise_group_path.empty()) {
    const auto g = io::load_ints(c.noise_group_path);
    if (static_cast<Eigen::Index>(g.size()) != d.y.cols()) throw DataError("noise_group length mismatch");
    for (int v : g) d.low_noise.push_back(v == 1);
  }
  return d;
}

namespace experiment_detail {

inline TrialData synth_trial(const ExperimentConfig& c, std::uint64_t stream, int t) {
  SynthConfig s = c.synth;
  s.seed = derive_seed(c.seed, stream, static_cast<std::uint64_t>(t));
  auto ds = gen_uos_dataset(s);
  return {std::move(ds.y), std::move(ds.labels), ds.low_noise_mask(), std::move(ds.bases), s.seed};
}

inline std::size_t memory_estimate(const ExperimentConfig& c, Eigen::Index d, Eigen::Index n) {
  const bool graph = c.algorithm == Algorithm::tsc ||
                     ((c.algorithm == Algorithm::alpcahus || c.algorithm == Algorithm::kss) &&
                      c.init == InitMethod::tips) ||
                     ((c.algorithm == Algorithm::alpcahus || c.algorithm == Algorithm::ekss) &&
                      c.base_clusterings > 1);
  const auto dn = static_cast<std::size_t>(d * n);
  const auto nn = static_cast<std::size_t>(n * n);
  return sizeof(double) * (4 * dn + (graph ? 5 * nn : 0));
}

}  // namespace experiment_detail

/// Picks q from `c.q_grid` by mean clustering error on training draws from a
/// separate seed stream (ties favour the earlier grid entry). Loaded data is
/// reused with training-only algorithm seeds. For ensembles the base
/// clusterings do not depend on q, so they are computed once per draw.
inline std::pair<int, std::vector<std::pair<int, double>>> tune_q(const ExperimentConfig& c,
                                                                   const LoadedData* loaded = nullptr) {
  using namespace experiment_detail;
  const std::size_t grid = c.q_grid.size();
  std::vector<std::vector<double>> errs(grid, std::vector<double>(static_cast<std::size_t>(c.tune_trials)));
  parallel_for(c.tune_trials, c.jobs, [&](int t) {
    TrialData d;
    if (loaded) {
      d.y = loaded->y;
      d.truth = loaded->truth;
      d.low_noise = loaded->low_noise;
    } else {
      d = synth_trial(c, kTuneDataStream, t);
    }
    const std::uint64_t seed = derive_seed(c.seed, kTuneAlgorithmStream, static_cast<std::uint64_t>(t));
    if (is_ensemble(c)) {
      const auto r = c.algorithm == Algorithm::alpcahus
                         ? alpcahus_ensemble(d.y, alpcahus_options(c, c.q_grid.front()), seed)
                         : ekss_ensemble(d.y, ekss_options(c, c.q_grid.front()), seed);
      std::vector<Labels> runs;
      for (const auto& tr : r.trials) runs.push_back(tr.labels);
      KMeansOptions km;
      km.restarts = c.kmeans_restarts;
      for (std::size_t g = 0; g < grid; ++g) {
        Rng rng = make_rng(child_seed(seed, static_cast<std::uint64_t>(c.base_clusterings)));
        errs[g][t] = clustering_error(consensus_cluster(runs, c.clusters, c.q_grid[g], rng, km), d.truth,
                                      c.clusters);
      }
    } else {
      for (std::size_t g = 0; g < grid; ++g) {
        const auto out = run_algorithm(d.y, c, c.q_grid[g], seed, &d.truth, &d.low_noise);
        errs[g][t] = clustering_error(out.labels, d.truth, c.clusters);
      }
    }
  });
  std::vector<std::pair<int, double>> scores;
  int best = c.q_grid.front();
  double best_err = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < grid; ++g) {
    const double mean = summarize(errs[g]).mean;
    scores.emplace_back(c.q_grid[g], mean);
    if (mean < best_err) {
      best_err = mean;
      best = c.q_grid[g];
    }
  }
  return {best, scores};
}

inline RunReport run_experiment(const ExperimentConfig& cfg) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  cfg.validate();
  RunReport rep;
  rep.config = cfg;

  std::optional<LoadedData> loaded;
  if (cfg.uses_input_data()) loaded = load_input_data(cfg);
  const bool has_truth = !loaded || !loaded->truth.empty();

  if (!cfg.q_grid.empty()) {
    auto [q, scores] = tune_q(cfg, loaded ? &*loaded : nullptr);
    rep.q_used = q;
    rep.q_scores = std::move(scores);
  } else {
    rep.q_used = cfg.resolved_q();
  }

  rep.trials.resize(static_cast<std::size_t>(cfg.trials));
  parallel_for(cfg.trials, cfg.jobs, [&](int t) {
    TrialData d;
    if (loaded) {
      d.y = loaded->y;
      d.truth = loaded->truth;
      d.low_noise = loaded->low_noise;
    } else {
      d = experiment_detail::synth_trial(cfg, kDataStream, t);
    }
    TrialRecord& rec = rep.trials[t];
    rec.index = t;
    rec.data_seed = d.seed;
    rec.algorithm_seed = derive_seed(cfg.seed, kAlgorithmStream, static_cast<std::uint64_t>(t));
    const auto start = clock::now();
    try {
      rec.output = run_algorithm(d.y, cfg, rep.q_used, rec.algorithm_seed,
                                 has_truth ? &d.truth : nullptr, d.low_noise.empty() ? nullptr : &d.low_noise);
    } catch (const std::exception& e) {
      const std::string msg = "trial " + std::to_string(t) + " (algorithm seed " +
                              std::to_string(rec.algorithm_seed) + ") failed: " + e.what();
      if (dynamic_cast<const std::invalid_argument*>(&e)) throw ConfigError(msg);
      if (dynamic_cast<const DataError*>(&e)) throw DataError(msg);
      throw NumericalError(msg);
    }
    rec.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - start).count();
    if (has_truth) {
      rec.clustering_error = clustering_error(rec.output.labels, d.truth, cfg.clusters);
      rec.mean_iou = mean_iou(rec.output.labels, d.truth, cfg.clusters).mean_iou;
      if (!d.bases.empty())
        rec.subspace_error =
            matched_subspace_error(rec.output.labels, d.truth, cfg.clusters, rec.output.bases, d.bases);
    }
  });

  std::vector<double> ce, iou, se;
  for (const auto& r : rep.trials) {
    ce.push_back(r.clustering_error);
    iou.push_back(r.mean_iou);
    se.push_back(r.subspace_error);
  }
  rep.clustering_error = summarize(ce);
  rep.mean_iou = summarize(iou);
  rep.subspace_error = summarize(se);
  const Eigen::Index d = loaded ? loaded->y.rows() : cfg.synth.ambient_dim;
  const Eigen::Index n = loaded ? loaded->y.cols() : cfg.synth.samples();
  rep.peak_memory_estimate = experiment_detail::memory_estimate(cfg, d, n);
  rep.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  return rep;
}

inline nlohmann::json to_json(const Summary& s) {
  return {{"mean", s.mean}, {"median", s.median}, {"std", s.std},
          {"min", s.min},   {"max", s.max},       {"count", s.count}};
}

/// Report as JSON. Numeric content other than the wall_ms fields is a pure
/// function of the resolved configuration.
inline nlohmann::json to_json(const RunReport& r) {
  nlohmann::json trials = nlohmann::json::array();
  for (const auto& t : r.trials) {
    std::vector<int> labels;
    for (int c : t.output.labels) labels.push_back(c + 1);
    trials.push_back({{"trial", t.index},
                      {"data_seed", t.data_seed},
                      {"algorithm_seed", t.algorithm_seed},
                      {"labels", labels},
                      {"clustering_error", t.clustering_error},
                      {"mean_iou", t.mean_iou},
                      {"subspace_error", t.subspace_error},
                      {"cost_trace", t.output.cost_trace},
                      {"ranks", t.output.ranks},
                      {"rounds", t.output.rounds},
                      {"converged", t.output.converged},
                      {"repairs", t.output.repairs},
                      {"wall_ms", t.wall_ms}});
  }
  nlohmann::json tuning = nlohmann::json::array();
  for (const auto& [q, e] : r.q_scores) tuning.push_back({{"q", q}, {"mean_clustering_error", e}});
  return {{"config", to_json(r.config)},
          {"seed", r.config.seed},
          {"q_used", r.q_used},
          {"q_tuning", tuning},
          {"trials", trials},
          {"summary",
           {{"clustering_error", to_json(r.clustering_error)},
            {"mean_iou", to_json(r.mean_iou)},
            {"subspace_error", to_json(r.subspace_error)}}},
          {"peak_memory_estimate_bytes", r.peak_memory_estimate},
          {"wall_ms", r.wall_ms}};
}

inline std::string trials_csv(const RunReport& r) {
  std::ostringstream out;
  out << "trial,data_seed,algorithm_seed,clustering_error,mean_iou,subspace_error,rounds,converged,wall_ms\n";
  for (const auto& t : r.trials)
    out << t.index << ',' << t.data_seed << ',' << t.algorithm_seed << ','
        << io::format_double(t.clustering_error) << ',' << io::format_double(t.mean_iou) << ','
        << io::format_double(t.subspace_error) << ',' << t.output.rounds << ','
        << (t.output.converged ? 1 : 0) << ',' << io::format_double(t.wall_ms) << '\n';
  return out.str();
}

inline std::string summary_csv(const RunReport& r) {
  std::ostringstream out;
  out << "metric,mean,median,std,min,max,count\n";
  const auto row = [&](const char* name, const Summary& s) {
    out << name << ',' << io::format_double(s.mean) << ',' << io::format_double(s.median) << ','
        << io::format_double(s.std) << ',' << io::format_double(s.min) << ','
        << io::format_double(s.max) << ',' << s.count << '\n';
  };
  row("clustering_error", r.clustering_error);
  row("mean_iou", r.mean_iou);
  row("subspace_error", r.subspace_error);
  return out.str();
}

/// report.json, trials.csv and summary.csv under `dir`.
inline void write_report(const std::filesystem::path& dir, const RunReport& r) {
  io::write_atomic(dir / "report.json", to_json(r).dump(2) + "\n");
  io::write_atomic(dir / "trials.csv", trials_csv(r));
  io::write_atomic(dir / "summary.csv", summary_csv(r));
}

struct LandscapeCell {
  double nu_ratio = 1.0;
  double n_ratio = 1.0;
  std::vector<Summary> errors;  ///< one per algorithm
};

struct LandscapeTable {
  std::vector<Algorithm> algorithms;
  std::vector<LandscapeCell> cells;
};

/// Mean/std clustering error per algorithm over a (nu2/nu1) x (N2/N1) grid.
/// Every algorithm sees the same datasets in a cell. A failing cell-algorithm
/// pair is reported as NaN.
inline LandscapeTable run_landscape(const ExperimentConfig& base, const std::vector<double>& nu_ratios,
                                    const std::vector<double>& n_ratios,
                                    const std::vector<Algorithm>& algorithms) {
  if (nu_ratios.empty() || n_ratios.empty()) throw ConfigError("landscape: empty grid");
  if (algorithms.empty()) throw ConfigError("landscape: no algorithms");
  if (base.uses_input_data()) throw ConfigError("landscape: needs synthetic data");
  LandscapeTable table;
  table.algorithms = algorithms;
  for (double nr : nu_ratios) {
    for (double sr : n_ratios) {
      LandscapeCell cell;
      cell.nu_ratio = nr;
      cell.n_ratio = sr;
      for (Algorithm a : algorithms) {
        ExperimentConfig c = base;
        c.algorithm = a;
        c.synth.nu_high = nr * base.synth.nu_low;
        c.synth.n_high = static_cast<int>(std::lround(sr * base.synth.n_low));
        if (a == Algorithm::kss || a == Algorithm::tsc || a == Algorithm::kmeans || a == Algorithm::oracle)
          c.base_clusterings = 1;
        if (c.base_clusterings > 1 && c.init == InitMethod::tips) c.init = InitMethod::random;
        try {
          cell.errors.push_back(run_experiment(c).clustering_error);
        } catch (const std::exception&) {
          cell.errors.push_back(Summary{});
        }
      }
      table.cells.push_back(std::move(cell));
    }
  }
  return table;
}

inline std::string landscape_csv(const LandscapeTable& t) {
  std::ostringstream out;
  out << "nu_ratio,n_ratio";
  for (Algorithm a : t.algorithms) out << ',' << to_string(a) << "_mean," << to_string(a) << "_std";
  out << '\n';
  for (const auto& c : t.cells) {
    out << io::format_double(c.nu_ratio) << ',' << io::format_double(c.n_ratio);
    for (const auto& s : c.errors) out << ',' << io::format_double(s.mean) << ',' << io::format_double(s.std);
    out << '\n';
  }
  return out.str();
}

}  // namespace hetsub
