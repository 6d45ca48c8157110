// hetsub command-line front end.
//
//   hetsub synth     --out-dir DIR       synthetic Y.csv, labels.txt, noise_group.txt
//   hetsub cluster   --out FILE          one run on --matrix (or a synthetic draw)
//   hetsub rank      --matrix FILE       rank estimate for one cluster
//   hetsub eval      --pred F --truth F  clustering error and mean IOU
//   hetsub landscape --out FILE          error table over the noise/size grid
//   hetsub report    --out-dir DIR       repeated trials, JSON and CSV report
//
// Every subcommand accepts --config FILE plus per-key overrides.

#include "hetsub/hetsub.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>

namespace {

using namespace hetsub;

struct Overrides {
  std::string config_path;
  // (section, key) -> value, applied after the config file.
  std::vector<std::tuple<std::string, std::string, std::string>> values;
  std::map<std::string, std::string> storage;
};

const std::vector<std::pair<std::string, std::string>>& override_keys() {
  static const std::vector<std::pair<std::string, std::string>> keys{
      {"run", "algorithm"},          {"run", "clusters"},
      {"run", "ranks"},              {"run", "auto_initial_rank"},
      {"run", "rank_method"},        {"run", "q"},
      {"run", "q_grid"},             {"run", "tune_trials"},
      {"run", "base_clusterings"},   {"run", "lr_iterations"},
      {"run", "max_rounds"},         {"run", "alpha_noise"},
      {"run", "flippa_percentile"},  {"run", "flippa_trials"},
      {"run", "weighting"},          {"run", "init"},
      {"run", "seed"},               {"run", "trials"},
      {"run", "jobs"},               {"run", "kmeans_restarts"},
      {"synth", "ambient_dim"},      {"synth", "subspace_dim"},
      {"synth", "n_low"},            {"synth", "n_high"},
      {"synth", "nu_low"},           {"synth", "nu_high"},
      {"synth", "coef_std"},         {"data", "matrix"},
      {"data", "labels"},            {"data", "noise_group"}};
  return keys;
}

std::string kebab(std::string s) {
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

void add_config_options(CLI::App& app, Overrides& o) {
  app.add_option("--config", o.config_path, "INI configuration file")->check(CLI::ExistingFile);
  for (const auto& [section, key] : override_keys()) {
    const std::string id = section + "." + key;
    o.storage[id];
    app.add_option("--" + kebab(key), o.storage[id], section + "." + key);
  }
}

ExperimentConfig resolve(CLI::App& app, Overrides& o) {
  ExperimentConfig c;
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw ConfigError("cannot open " + o.config_path);
    parse_config(in, c);
  }
  for (const auto& [section, key] : override_keys()) {
    if (app.count("--" + kebab(key)) == 0) continue;
    set_config_value(c, section, key, o.storage[section + "." + key]);
  }
  apply_seed_env(c);
  c.validate();
  return c;
}

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v = 0.0;
    const auto t = item.find_first_not_of(' ');
    const auto [ptr, ec] = std::from_chars(item.data() + (t == std::string::npos ? 0 : t),
                                           item.data() + item.size(), v);
    if (ec != std::errc{} || ptr != item.data() + item.size())
      throw ConfigError("cannot parse number '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

int cmd_synth(const ExperimentConfig& c, const std::filesystem::path& dir) {
  SynthConfig s = c.synth;
  s.seed = c.seed;
  const auto ds = gen_uos_dataset(s);
  io::save_matrix(dir / "Y.csv", ds.y);
  io::save_labels(dir / "labels.txt", ds.labels);
  io::save_ints(dir / "noise_group.txt", ds.noise_group);
  for (std::size_t k = 0; k < ds.bases.size(); ++k)
    io::save_matrix(dir / ("basis_" + std::to_string(k + 1) + ".csv"), ds.bases[k]);
  std::cout << "wrote " << ds.y.rows() << "x" << ds.y.cols() << " dataset to " << dir.string() << "\n";
  return 0;
}

int cmd_cluster(ExperimentConfig c, const std::string& out, const std::string& report_dir) {
  c.trials = 1;
  const auto rep = run_experiment(c);
  const auto& t = rep.trials.front();
  if (!out.empty()) io::save_labels(out, t.output.labels);
  else std::cout << io::format_labels(t.output.labels);
  if (!report_dir.empty()) write_report(report_dir, rep);
  if (!std::isnan(t.clustering_error))
    std::cerr << "clustering_error " << io::format_double(t.clustering_error) << "\n";
  return 0;
}

int cmd_rank(const ExperimentConfig& c) {
  if (!c.uses_input_data()) throw ConfigError("rank: --matrix is required");
  const Matrix y = io::load_matrix(c.matrix_path);
  RankEstimate r;
  if (c.rank_method == RankMethod::eigengap) {
    r = eigengap_rank(y);
  } else {
    Rng rng = make_rng(c.seed);
    r = flippa_rank(y, rng, {c.flippa_trials, c.flippa_percentile});
  }
  nlohmann::json j = {{"rank", r.rank},
                      {"method", to_string(r.method)},
                      {"no_signal", r.no_signal},
                      {"saturated", r.saturated}};
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_eval(const ExperimentConfig& c, const std::string& pred_path, const std::string& truth_path) {
  const auto pred = io::load_labels(pred_path);
  const auto truth = io::load_labels(truth_path);
  if (pred.size() != truth.size())
    throw DataError("eval: " + std::to_string(pred.size()) + " predicted vs " +
                    std::to_string(truth.size()) + " true labels");
  check_labels(pred, c.clusters);
  check_labels(truth, c.clusters);
  const auto iou = mean_iou(pred, truth, c.clusters);
  nlohmann::json j = {{"clustering_error", clustering_error(pred, truth, c.clusters)},
                      {"mean_iou", iou.mean_iou},
                      {"excluded_classes", iou.excluded_classes}};
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_landscape(const ExperimentConfig& c, const std::string& nu, const std::string& n,
                  const std::string& algos, const std::string& out) {
  std::vector<Algorithm> list;
  std::stringstream ss(algos);
  std::string item;
  while (std::getline(ss, item, ',')) list.push_back(parse_algorithm(item));
  const auto table = run_landscape(c, parse_doubles(nu), parse_doubles(n), list);
  const auto csv = landscape_csv(table);
  if (out.empty()) std::cout << csv;
  else io::write_atomic(out, csv);
  return 0;
}

int cmd_report(const ExperimentConfig& c, const std::string& dir) {
  const auto rep = run_experiment(c);
  write_report(dir, rep);
  std::cout << summary_csv(rep);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heteroscedastic subspace clustering"};
  app.require_subcommand(1);

  Overrides o_synth, o_cluster, o_rank, o_eval, o_land, o_report;
  std::string synth_dir, cluster_out, cluster_report, pred, truth, land_out, report_dir;
  std::string nu_ratios = "1,300", n_ratios = "1,50", algorithms = "alpcahus,ekss";

  auto* synth = app.add_subcommand("synth", "Generate a synthetic union-of-subspaces dataset");
  add_config_options(*synth, o_synth);
  synth->add_option("--out-dir", synth_dir, "Output directory")->required();

  auto* cluster = app.add_subcommand("cluster", "Cluster one dataset");
  add_config_options(*cluster, o_cluster);
  cluster->add_option("--out", cluster_out, "Label file (1-based); stdout if absent");
  cluster->add_option("--report-dir", cluster_report, "Also write a run report here");

  auto* rank = app.add_subcommand("rank", "Estimate the rank of one cluster's data");
  add_config_options(*rank, o_rank);

  auto* eval = app.add_subcommand("eval", "Score predicted labels against ground truth");
  add_config_options(*eval, o_eval);
  eval->add_option("--pred", pred, "Predicted labels")->required()->check(CLI::ExistingFile);
  eval->add_option("--truth", truth, "True labels")->required()->check(CLI::ExistingFile);

  auto* land = app.add_subcommand("landscape", "Clustering error over a noise/size grid");
  add_config_options(*land, o_land);
  land->add_option("--nu-ratios", nu_ratios, "nu_high/nu_low values, comma separated");
  land->add_option("--n-ratios", n_ratios, "n_high/n_low values, comma separated");
  land->add_option("--algorithms", algorithms, "Comma separated algorithm names");
  land->add_option("--out", land_out, "CSV output; stdout if absent");

  auto* report = app.add_subcommand("report", "Repeated trials with a full report");
  add_config_options(*report, o_report);
  report->add_option("--out-dir", report_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*synth) return cmd_synth(resolve(*synth, o_synth), synth_dir);
    if (*cluster) return cmd_cluster(resolve(*cluster, o_cluster), cluster_out, cluster_report);
    if (*rank) return cmd_rank(resolve(*rank, o_rank));
    if (*eval) return cmd_eval(resolve(*eval, o_eval), pred, truth);
    if (*land) return cmd_landscape(resolve(*land, o_land), nu_ratios, n_ratios, algorithms, land_out);
    if (*report) return cmd_report(resolve(*report, o_report), report_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
