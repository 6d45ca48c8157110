#pragma once

// Experiment configuration.
//
// File grammar (INI style):
//   # comment            ; comment
//   [section]            one of run, synth, data
//   key = value          keys before any [section] belong to [run]
// Keys are the snake_case field names below; command-line flags use the same
// names in --kebab-case. Unknown sections or keys are errors.

#include "hetsub/alpcahus.hpp"
#include "hetsub/core.hpp"
#include "hetsub/lr_alpcah.hpp"
#include "hetsub/rank.hpp"
#include "hetsub/synth.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdlib>
#include <istream>
#include <optional>
#include <sstream>
#include <string>

namespace hetsub {

enum class Algorithm { alpcahus, kss, ekss, tsc, kmeans, oracle };

inline const std::vector<std::pair<Algorithm, std::string>>& algorithm_names() {
  static const std::vector<std::pair<Algorithm, std::string>> names{
      {Algorithm::alpcahus, "alpcahus"}, {Algorithm::kss, "kss"},       {Algorithm::ekss, "ekss"},
      {Algorithm::tsc, "tsc"},           {Algorithm::kmeans, "kmeans"}, {Algorithm::oracle, "oracle"}};
  return names;
}

inline std::string to_string(Algorithm a) {
  for (const auto& [v, n] : algorithm_names())
    if (v == a) return n;
  return "?";
}

inline Algorithm parse_algorithm(const std::string& s) {
  for (const auto& [v, n] : algorithm_names())
    if (n == s) return v;
  throw ConfigError("unknown algorithm '" + s + "'");
}

inline std::string to_string(Weighting w) { return w == Weighting::inverse ? "inverse" : "literal"; }
inline std::string to_string(InitMethod m) {
  switch (m) {
    case InitMethod::tips: return "tips";
    case InitMethod::partition: return "partition";
    default: return "random";
  }
}

struct ExperimentConfig {
  // [run]
  Algorithm algorithm = Algorithm::alpcahus;
  int clusters = 2;                 ///< K
  std::vector<int> ranks{3};        ///< d_hat, uniform or per cluster; ignored when auto_rank
  bool auto_rank = false;           ///< ranks = auto: shrink from auto_initial_rank
  int auto_initial_rank = 10;
  RankMethod rank_method = RankMethod::flippa;
  int q = 0;                        ///< 0 = max rank
  std::vector<int> q_grid;          ///< non-empty: choose q on training data
  int tune_trials = 5;
  int base_clusterings = 1;         ///< B
  int lr_iterations = kDefaultLrIterations;  ///< T1
  int max_rounds = 0;               ///< T2; 0 = 3 if B > 1, else 50
  double alpha_noise = kDefaultAlpha;
  double flippa_percentile = kDefaultFlipPercentile;
  int flippa_trials = kDefaultFlipTrials;
  Weighting weighting = Weighting::inverse;
  InitMethod init = InitMethod::random;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int trials = 1;
  int jobs = 1;
  int kmeans_restarts = 10;

  // [synth]
  SynthConfig synth = landscape_config(1.0, 1.0);

  // [data]
  std::string matrix_path;
  std::string labels_path;
  std::string noise_group_path;

  bool uses_input_data() const { return !matrix_path.empty(); }

  int resolved_q() const {
    if (q > 0) return q;
    if (auto_rank) return auto_initial_rank;
    return *std::max_element(ranks.begin(), ranks.end());
  }

  int resolved_rounds() const { return max_rounds > 0 ? max_rounds : default_rounds(base_clusterings); }

  std::vector<int> initial_ranks() const {
    return auto_rank ? std::vector<int>{auto_initial_rank} : ranks;
  }

  void validate() const {
    if (clusters < 1) throw ConfigError("clusters must be >= 1");
    if (!auto_rank) {
      if (ranks.empty()) throw ConfigError("ranks must not be empty");
      if (ranks.size() != 1 && static_cast<int>(ranks.size()) != clusters)
        throw ConfigError("ranks needs one value or one per cluster");
      for (int r : ranks)
        if (r < 1) throw ConfigError("ranks must be >= 1");
    } else {
      if (algorithm == Algorithm::tsc || algorithm == Algorithm::kmeans)
        throw ConfigError("ranks = auto is not available for " + to_string(algorithm));
      if (auto_initial_rank < 1) throw ConfigError("auto_initial_rank must be >= 1");
    }
    if (q < 0) throw ConfigError("q must be >= 0");
    for (int g : q_grid)
      if (g < 1) throw ConfigError("q_grid entries must be >= 1");
    if (tune_trials < 1) throw ConfigError("tune_trials must be >= 1");
    if (base_clusterings < 1) throw ConfigError("base_clusterings must be >= 1");
    if (lr_iterations < 1) throw ConfigError("lr_iterations must be >= 1");
    if (max_rounds < 0) throw ConfigError("max_rounds must be >= 0");
    if (!(alpha_noise > 0.0)) throw ConfigError("alpha_noise must be > 0");
    if (!(flippa_percentile > 0.0 && flippa_percentile <= 100.0))
      throw ConfigError("flippa_percentile must be in (0, 100]");
    if (flippa_trials < 1) throw ConfigError("flippa_trials must be >= 1");
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    if (kmeans_restarts < 1) throw ConfigError("kmeans_restarts must be >= 1");
    if (init == InitMethod::tips && base_clusterings > 1)
      throw ConfigError("init = tips requires base_clusterings = 1");
    if (!uses_input_data()) {
      synth.validate();
      if (synth.clusters != clusters) throw ConfigError("synth clusters must equal clusters");
    }
    if (algorithm == Algorithm::oracle && uses_input_data() &&
        (labels_path.empty() || noise_group_path.empty()))
      throw ConfigError("oracle needs labels and noise_group files");
    if (!q_grid.empty() && uses_input_data() && labels_path.empty())
      throw ConfigError("q_grid tuning needs ground-truth labels");
  }
};

namespace config_detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto t = trim(v);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc{} || ptr != t.data() + t.size())
    throw ConfigError(key + ": cannot parse '" + v + "'");
  return out;
}

inline std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<int>(key, item));
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

}  // namespace config_detail

/// Sets one key. `section` is "run", "synth" or "data"; dashes in `key` are
/// accepted in place of underscores.
inline void set_config_value(ExperimentConfig& c, const std::string& section, std::string key,
                             const std::string& raw) {
  using namespace config_detail;
  std::replace(key.begin(), key.end(), '-', '_');
  const std::string v = trim(raw);
  const std::string name = section + "." + key;
  if (section == "run") {
    if (key == "algorithm") c.algorithm = parse_algorithm(v);
    else if (key == "clusters") {
      c.clusters = parse_number<int>(name, v);
      c.synth.clusters = c.clusters;
    } else if (key == "ranks") {
      if (v == "auto") c.auto_rank = true;
      else {
        c.auto_rank = false;
        c.ranks = parse_int_list(name, v);
      }
    } else if (key == "auto_initial_rank") c.auto_initial_rank = parse_number<int>(name, v);
    else if (key == "rank_method") {
      if (v == "flippa") c.rank_method = RankMethod::flippa;
      else if (v == "eigengap") c.rank_method = RankMethod::eigengap;
      else throw ConfigError(name + ": expected flippa or eigengap");
    } else if (key == "q") c.q = parse_number<int>(name, v);
    else if (key == "q_grid") c.q_grid = v.empty() ? std::vector<int>{} : parse_int_list(name, v);
    else if (key == "tune_trials") c.tune_trials = parse_number<int>(name, v);
    else if (key == "base_clusterings") c.base_clusterings = parse_number<int>(name, v);
    else if (key == "lr_iterations") c.lr_iterations = parse_number<int>(name, v);
    else if (key == "max_rounds") c.max_rounds = parse_number<int>(name, v);
    else if (key == "alpha_noise") c.alpha_noise = parse_number<double>(name, v);
    else if (key == "flippa_percentile") c.flippa_percentile = parse_number<double>(name, v);
    else if (key == "flippa_trials") c.flippa_trials = parse_number<int>(name, v);
    else if (key == "weighting") {
      if (v == "inverse") c.weighting = Weighting::inverse;
      else if (v == "literal") c.weighting = Weighting::literal;
      else throw ConfigError(name + ": expected inverse or literal");
    } else if (key == "init") {
      if (v == "random") c.init = InitMethod::random;
      else if (v == "partition") c.init = InitMethod::partition;
      else if (v == "tips") c.init = InitMethod::tips;
      else throw ConfigError(name + ": expected random, partition or tips");
    } else if (key == "seed") {
      c.seed = parse_number<std::uint64_t>(name, v);
      c.seed_set = true;
    } else if (key == "trials") c.trials = parse_number<int>(name, v);
    else if (key == "jobs") c.jobs = parse_number<int>(name, v);
    else if (key == "kmeans_restarts") c.kmeans_restarts = parse_number<int>(name, v);
    else throw ConfigError("unknown key " + name);
  } else if (section == "synth") {
    auto& s = c.synth;
    if (key == "ambient_dim") s.ambient_dim = parse_number<int>(name, v);
    else if (key == "clusters") s.clusters = parse_number<int>(name, v);
    else if (key == "subspace_dim") s.subspace_dim = parse_number<int>(name, v);
    else if (key == "n_low") s.n_low = parse_number<int>(name, v);
    else if (key == "n_high") s.n_high = parse_number<int>(name, v);
    else if (key == "nu_low") s.nu_low = parse_number<double>(name, v);
    else if (key == "nu_high") s.nu_high = parse_number<double>(name, v);
    else if (key == "coef_std") s.coef_std = parse_number<double>(name, v);
    else throw ConfigError("unknown key " + name);
  } else if (section == "data") {
    if (key == "matrix") c.matrix_path = v;
    else if (key == "labels") c.labels_path = v;
    else if (key == "noise_group") c.noise_group_path = v;
    else throw ConfigError("unknown key " + name);
  } else {
    throw ConfigError("unknown section [" + section + "]");
  }
}

inline void parse_config(std::istream& in, ExperimentConfig& c) {
  std::string line, section = "run";
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = config_detail::trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": bad section header");
      section = config_detail::trim(t.substr(1, t.size() - 2));
      if (section != "run" && section != "synth" && section != "data")
        throw ConfigError("line " + std::to_string(line_no) + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    try {
      set_config_value(c, section, config_detail::trim(t.substr(0, eq)), t.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig c;
  parse_config(in, c);
  return c;
}

/// Seed fallback: HETSUB_SEED when no seed was configured.
inline void apply_seed_env(ExperimentConfig& c) {
  if (c.seed_set) return;
  if (const char* env = std::getenv("HETSUB_SEED")) {
    c.seed = config_detail::parse_number<std::uint64_t>("HETSUB_SEED", env);
    c.seed_set = true;
  }
}

/// Fully resolved configuration, defaults included. Keys are sorted.
inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json run = {
      {"algorithm", to_string(c.algorithm)},
      {"clusters", c.clusters},
      {"auto_initial_rank", c.auto_initial_rank},
      {"rank_method", to_string(c.rank_method)},
      {"q", c.resolved_q()},
      {"q_grid", c.q_grid},
      {"tune_trials", c.tune_trials},
      {"base_clusterings", c.base_clusterings},
      {"lr_iterations", c.lr_iterations},
      {"max_rounds", c.resolved_rounds()},
      {"alpha_noise", c.alpha_noise},
      {"flippa_percentile", c.flippa_percentile},
      {"flippa_trials", c.flippa_trials},
      {"weighting", to_string(c.weighting)},
      {"init", to_string(c.init)},
      {"seed", c.seed},
      {"trials", c.trials},
      {"jobs", c.jobs},
      {"kmeans_restarts", c.kmeans_restarts},
  };
  run["ranks"] = c.auto_rank ? nlohmann::json("auto") : nlohmann::json(c.ranks);
  nlohmann::json out = {{"run", run}};
  if (c.uses_input_data()) {
    out["data"] = {{"matrix", c.matrix_path}, {"labels", c.labels_path}, {"noise_group", c.noise_group_path}};
  } else {
    const auto& s = c.synth;
    out["synth"] = {{"ambient_dim", s.ambient_dim}, {"clusters", s.clusters},
                    {"subspace_dim", s.subspace_dim}, {"n_low", s.n_low},
                    {"n_high", s.n_high}, {"nu_low", s.nu_low},
                    {"nu_high", s.nu_high}, {"coef_std", s.coef_std}};
  }
  return out;
}

/// The same configuration in the file grammar; parse_config reads it back.
inline std::string to_ini(const ExperimentConfig& c) {
  const auto j = to_json(c);
  std::ostringstream out;
  for (const auto& [section, body] : j.items()) {
    out << "[" << section << "]\n";
    for (const auto& [key, value] : body.items()) {
      std::string v;
      if (value.is_string()) v = value.get<std::string>();
      else if (value.is_array()) {
        for (std::size_t i = 0; i < value.size(); ++i) v += (i ? "," : "") + value[i].dump();
      } else v = value.dump();
      out << key << " = " << v << "\n";
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace hetsub
